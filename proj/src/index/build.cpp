#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "../util/blocking_queue.hpp"
#include "segment_writer.hpp"

namespace shardsearch {
namespace {

std::string numbered(std::string_view prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return std::string(prefix) + buf;
}

// Builds one shard within a snippet budget: spills a sub-segment whenever the
// buffer is full and merges the spills when the shard is finished.
class ShardWriter {
 public:
  ShardWriter(std::shared_ptr<const Analyzer> analyzer, const BuildOptions& options,
              std::size_t ram_budget, std::filesystem::path final_dir,
              std::filesystem::path spill_dir)
      : buffer_(std::move(analyzer), options.max_words, options.bm25),
        budget_(options.budget),
        ram_budget_(ram_budget),
        final_dir_(std::move(final_dir)),
        spill_dir_(std::move(spill_dir)) {}

  void add(const Snippet& snippet, std::uint64_t source_position) {
    buffer_.add(snippet, source_position);
    if (buffer_.size() >= ram_budget_) spill();
  }

  // False when the shard received no snippets.
  bool finish() {
    if (spills_.empty()) {
      if (buffer_.empty()) return false;
      buffer_.flush(final_dir_, budget_);
      return true;
    }
    if (!buffer_.empty()) spill();
    std::vector<std::shared_ptr<const Segment>> parts;
    for (const auto& dir : spills_) parts.push_back(Segment::open(dir));
    merge_segments(parts, final_dir_, budget_);
    parts.clear();
    std::filesystem::remove_all(spill_dir_);
    return true;
  }

 private:
  void spill() {
    auto dir = spill_dir_ / numbered("part-", spills_.size());
    buffer_.flush(dir, budget_);
    spills_.push_back(std::move(dir));
  }

  InvertedBuffer buffer_;
  WriteBudget* budget_;
  std::size_t ram_budget_;
  std::filesystem::path final_dir_;
  std::filesystem::path spill_dir_;
  std::vector<std::filesystem::path> spills_;
};

class IdRegistry {
 public:
  void add(const std::string& id, std::size_t ordinal) {
    if (!ids_.insert(id).second)
      throw IndexError("duplicate document id '" + id + "' (document " + std::to_string(ordinal) + ")");
  }

 private:
  std::unordered_set<std::string> ids_;
};

}  // namespace

BuildResult build_offline(DocumentStream& documents, std::shared_ptr<const Analyzer> analyzer,
                          const ShardPlan& plan, const std::filesystem::path& out_dir,
                          const BuildOptions& options) {
  plan.validate();
  if (options.max_words < 1) throw ConfigError("max_words must be at least 1");
  if (!analyzer) throw IndexError("build needs an analyzer");
  detail::prepare_output_dir(out_dir);

  const std::size_t shards = plan.shard_count;
  const auto spill_root = out_dir / ".spill";
  std::vector<std::unique_ptr<ShardWriter>> writers;
  for (std::size_t s = 0; s < shards; ++s) {
    auto final_dir = shards == 1 ? out_dir : out_dir / numbered("shard-", s);
    writers.push_back(std::make_unique<ShardWriter>(analyzer, options, plan.max_docs_in_ram,
                                                    std::move(final_dir),
                                                    spill_root / numbered("shard-", s)));
  }

  std::size_t jobs = options.jobs == 0 ? std::thread::hardware_concurrency() : options.jobs;
  jobs = std::clamp<std::size_t>(jobs, 1, shards);

  BuildResult result;
  IdRegistry ids;
  ShardAssigner assigner(documents, plan);
  std::vector<char> written(shards, 0);

  if (jobs == 1) {
    while (auto a = assigner.next()) {
      ids.add(a->document.id, a->ordinal);
      ++result.documents;
      for (const auto& snippet : segment(a->document, options.max_words)) {
        writers[a->shard]->add(snippet, a->ordinal);
        ++result.snippets;
      }
    }
    if (result.snippets == 0) throw IndexError("nothing to index: the corpus has no words");
    for (std::size_t s = 0; s < shards; ++s) written[s] = writers[s]->finish();
  } else {
    // One reader feeding `jobs` workers; shard s always goes to worker s % jobs,
    // so each shard sees its documents in input order.
    std::vector<std::unique_ptr<detail::BlockingQueue<ShardAssignment>>> queues;
    for (std::size_t w = 0; w < jobs; ++w)
      queues.push_back(std::make_unique<detail::BlockingQueue<ShardAssignment>>(256));
    std::atomic<std::size_t> snippets{0};
    std::atomic<bool> failed{false};
    std::atomic<bool> aborted{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto record_error = [&] {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
      failed = true;
    };

    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        while (auto a = queues[w]->pop()) {
          if (failed) continue;
          try {
            for (const auto& snippet : segment(a->document, options.max_words)) {
              writers[a->shard]->add(snippet, a->ordinal);
              ++snippets;
            }
          } catch (...) {
            record_error();
          }
        }
        if (failed || aborted) return;
        try {
          for (std::size_t s = w; s < shards; s += jobs) written[s] = writers[s]->finish();
        } catch (...) {
          record_error();
        }
      });
    }

    auto stop = [&] {
      for (auto& q : queues) q->close();
      for (auto& t : workers) t.join();
    };
    try {
      while (!failed) {
        auto a = assigner.next();
        if (!a) break;
        ids.add(a->document.id, a->ordinal);
        ++result.documents;
        const auto worker = a->shard % jobs;
        queues[worker]->push(std::move(*a));
      }
    } catch (...) {
      aborted = true;
      stop();
      throw;
    }
    // Workers finish their shards only after the whole input has been routed,
    // so an empty corpus is detected before anything is written.
    stop();
    if (error) std::rethrow_exception(error);
    result.snippets = snippets;
    if (result.snippets == 0) throw IndexError("nothing to index: the corpus has no words");
  }

  for (std::size_t s = 0; s < shards; ++s) {
    if (written[s]) {
      result.segments.push_back(shards == 1 ? out_dir : out_dir / numbered("shard-", s));
    } else if (options.on_warning) {
      options.on_warning("shard " + std::to_string(s) + " received no snippets; no segment written");
    }
  }
  std::filesystem::remove_all(spill_root);
  return result;
}

BuildResult build_offline(const CorpusSource& source, const AnalyzerConfig& analyzer,
                          const ShardPlan& plan, const std::filesystem::path& out_dir,
                          const BuildOptions& options, ReadOptions read_options) {
  auto built = make_analyzer(analyzer);
  DocumentReader reader(source, std::move(read_options));
  return build_offline(reader, std::move(built), plan, out_dir, options);
}

BuildResult build_streaming(DocumentStream& documents, std::shared_ptr<const Analyzer> analyzer,
                            std::size_t ram_budget_docs, const std::filesystem::path& out_dir,
                            const BuildOptions& options) {
  if (ram_budget_docs < 1) throw ConfigError("ram budget must be at least 1 snippet");
  if (options.max_words < 1) throw ConfigError("max_words must be at least 1");
  if (!analyzer) throw IndexError("build needs an analyzer");
  detail::prepare_output_dir(out_dir);

  InvertedBuffer buffer(std::move(analyzer), options.max_words, options.bm25);
  BuildResult result;
  IdRegistry ids;
  auto spill = [&] {
    auto dir = out_dir / numbered("part-", result.segments.size());
    buffer.flush(dir, options.budget);
    result.segments.push_back(std::move(dir));
  };

  while (auto doc = documents.next()) {
    const auto position = result.documents++;
    ids.add(doc->id, position);
    for (const auto& snippet : segment(*doc, options.max_words)) {
      buffer.add(snippet, position);
      ++result.snippets;
      if (buffer.size() >= ram_budget_docs) spill();
    }
  }
  if (!buffer.empty()) spill();
  if (result.snippets == 0) throw IndexError("nothing to index: the stream yielded no words");
  return result;
}

}  // namespace shardsearch
