#include "shardsearch/corpus.hpp"

namespace shardsearch {

void ShardPlan::validate() const {
  if (shard_count < 1) throw ConfigError("shard_count must be at least 1");
  if (max_docs_in_ram < 1) throw ConfigError("max_docs_in_ram must be at least 1");
}

ShardAssigner::ShardAssigner(DocumentStream& documents, ShardPlan plan)
    : documents_(documents), plan_(plan) {
  plan_.validate();
}

std::optional<ShardAssignment> ShardAssigner::next() {
  auto doc = documents_.next();
  if (!doc) return std::nullopt;
  const auto ordinal = ordinal_++;
  return ShardAssignment{shard_of(ordinal, plan_.shard_count), ordinal, std::move(*doc)};
}

}  // namespace shardsearch
