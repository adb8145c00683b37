#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <pthread.h>

#include "shardsearch/caption_dedup.hpp"
#include "shardsearch/cli.hpp"
#include "shardsearch/redaction.hpp"
#include "shardsearch/searcher.hpp"
#include "shardsearch/server.hpp"

namespace shardsearch::cli {
namespace {

using nlohmann::ordered_json;

struct InputFlags {
  std::string input;
  std::string format;
  std::string id_field = "id";
  std::string text_field = "contents";
  std::string meta_field = "meta";
  bool strict = false;

  void add(CLI::App* app, bool input_required) {
    auto* opt = app->add_option("--input", input, "Corpus file or directory, or - for standard input");
    if (input_required) opt->required();
    app->add_option("--format", format, "Input format; inferred from the extension when omitted")
        ->check(CLI::IsMember({"jsonl", "json", "csv", "tsv"}));
    app->add_option("--id-field", id_field, "Field holding the document id")->capture_default_str();
    app->add_option("--text-field", text_field, "Field holding the document text")->capture_default_str();
    app->add_option("--meta-field", meta_field, "Field holding the metadata object")->capture_default_str();
    app->add_flag("--strict", strict, "Abort on the first malformed record");
  }

  CorpusSource source() const {
    std::optional<SourceFormat> fmt;
    if (!format.empty()) fmt = parse_format(format);
    if (input == "-" && !fmt) fmt = SourceFormat::jsonl;
    auto src = CorpusSource::from_path(input, fmt);
    src.fields = {id_field, text_field, meta_field};
    return src;
  }

  ReadOptions read_options(std::ostream& err) const {
    ReadOptions options;
    options.strict = strict;
    options.on_skip = [&err](const CorpusError& e) { err << "warning: skipped " << e.what() << '\n'; };
    return options;
  }
};

struct AnalyzerFlags {
  std::string analyzer = "simple";
  std::string vocab;
  std::string merges;
  std::string unknown_policy = "drop";
  std::string stopwords;
  std::string stemming = "on";

  void add(CLI::App* app) {
    app->add_option("--analyzer", analyzer, "Analysis chain")
        ->check(CLI::IsMember({"simple", "subword"}))
        ->capture_default_str();
    app->add_option("--vocab", vocab, "Subword vocabulary file");
    app->add_option("--merges", merges, "Subword merges file");
    app->add_option("--unknown-policy", unknown_policy, "Subword unknown-symbol policy")
        ->check(CLI::IsMember({"drop", "byte_fallback"}))
        ->capture_default_str();
    app->add_option("--stopwords", stopwords, "Stopword file, one word per line");
    app->add_option("--stemming", stemming, "Porter stemming for the simple analyzer")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
  }

  AnalyzerConfig config() const {
    if (analyzer == "subword") {
      if (vocab.empty() || merges.empty()) throw CLI::ValidationError("--analyzer subword needs --vocab and --merges");
      return AnalyzerConfig::subword(vocab, merges, parse_unknown_policy(unknown_policy));
    }
    auto words = stopwords.empty() ? default_stopwords() : load_stopwords(stopwords);
    return AnalyzerConfig::simple(std::move(words), stemming == "on");
  }
};

ordered_json build_summary(const BuildResult& r) {
  ordered_json j;
  j["documents"] = r.documents;
  j["snippets"] = r.snippets;
  j["segments"] = ordered_json::array();
  for (const auto& s : r.segments) j["segments"].push_back(s.string());
  return j;
}

ordered_json stats_json(const Segment& seg, std::size_t top, const std::vector<std::string>& terms) {
  ordered_json j;
  j["N"] = seg.snippet_count();
  j["avgdl"] = seg.avgdl();
  j["lexicon_size"] = seg.lexicon().size();
  j["total_term_occurrences"] = seg.manifest().total_term_occurrences;
  j["max_words"] = seg.manifest().max_words;
  j["analyzer"] = seg.manifest().analyzer;
  j["analyzer_digest"] = seg.manifest().analyzer_digest;
  j["top_terms"] = ordered_json::array();
  for (const auto& t : top_terms(seg, top)) {
    ordered_json item;
    item["term"] = t.term;
    item["df"] = t.df;
    item["cf"] = t.cf;
    j["top_terms"].push_back(std::move(item));
  }
  if (!terms.empty()) {
    j["terms"] = ordered_json::object();
    for (const auto& term : terms) {
      const auto s = term_stats(seg, term);
      j["terms"][term] = {{"df", s.df}, {"cf", s.cf}};
    }
  }
  return j;
}

ordered_json hit_json(const ResultHit& hit) {
  ordered_json j;
  j["rank"] = hit.rank;
  j["id"] = hit.id;
  j["score"] = hit.score;
  j["text"] = hit.text;
  j["meta"] = hit.meta;
  j["matched_terms"] = hit.matched_terms;
  return j;
}

// Blocks SIGINT/SIGTERM in every thread and stops the server from a watcher.
int serve_until_signalled(HttpServer& server, std::ostream& err) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    const timespec tick{0, 200'000'000};
    while (!done) {
      if (sigtimedwait(&signals, nullptr, &tick) > 0) {
        server.stop();
        return;
      }
    }
  });
  server.serve();
  done = true;
  watcher.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  err << "server stopped\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse retrieval toolkit: ingest corpora, build BM25 indices, search and serve them"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto* index_cmd = app.add_subcommand("index", "Build, merge and inspect indices");
  index_cmd->require_subcommand(1);

  // index build
  auto* build = index_cmd->add_subcommand("build", "Build an index from a corpus");
  InputFlags build_in;
  AnalyzerFlags build_an;
  std::string build_out;
  std::size_t segment_words = kDefaultSnippetWords;
  std::size_t shards = 1;
  std::size_t jobs = 0;
  std::size_t ram_budget = ShardPlan{}.max_docs_in_ram;
  build_in.add(build, true);
  build_an.add(build);
  build->add_option("--output", build_out, "Output directory (absent or empty)")->required();
  build->add_option("--segment-words", segment_words, "Maximum words per snippet")->capture_default_str()->check(CLI::PositiveNumber);
  build->add_option("--shards", shards, "Number of shards")->capture_default_str()->check(CLI::PositiveNumber);
  build->add_option("--jobs", jobs, "Parallel shard writers; 0 uses every processor")->capture_default_str();
  build->add_option("--ram-budget", ram_budget, "Snippets buffered per shard before spilling")->capture_default_str()->check(CLI::PositiveNumber);

  // index stream
  auto* stream = index_cmd->add_subcommand("stream", "Index a document stream in one pass");
  InputFlags stream_in;
  stream_in.input = "-";
  AnalyzerFlags stream_an;
  std::string stream_out;
  std::size_t stream_words = kDefaultSnippetWords;
  std::size_t stream_budget = ShardPlan{}.max_docs_in_ram;
  bool stream_merge = false;
  stream_in.add(stream, false);
  stream_an.add(stream);
  stream->add_option("--output", stream_out, "Output directory (absent or empty)")->required();
  stream->add_option("--segment-words", stream_words, "Maximum words per snippet")->capture_default_str()->check(CLI::PositiveNumber);
  stream->add_option("--ram-budget", stream_budget, "Snippets buffered before a sub-segment is written")->capture_default_str()->check(CLI::PositiveNumber);
  stream->add_flag("--merge", stream_merge, "Merge the sub-segments into a single segment at --output");

  // index merge
  auto* merge = index_cmd->add_subcommand("merge", "Merge segments built with the same analyzer");
  std::vector<std::string> merge_inputs;
  std::string merge_out;
  merge->add_option("--inputs", merge_inputs, "Segment directories")->required()->expected(1, -1);
  merge->add_option("--output", merge_out, "Output directory (absent or empty)")->required();

  // index stats
  auto* stats = index_cmd->add_subcommand("stats", "Print segment statistics as JSON");
  std::string stats_index;
  std::size_t stats_top = 20;
  std::vector<std::string> stats_terms;
  bool stats_verify = false;
  stats->add_option("--index", stats_index, "Segment directory")->required();
  stats->add_option("--top", stats_top, "Number of most frequent terms")->capture_default_str();
  stats->add_option("--term", stats_terms, "Report df/cf for these (already analyzed) terms");
  stats->add_flag("--verify", stats_verify, "Recompute every file checksum");

  // search
  auto* search = app.add_subcommand("search", "Query an index; prints one JSON hit per line");
  std::string search_index;
  std::string search_query;
  std::size_t search_k = 10;
  std::string search_redaction = "on";
  search->add_option("--index", search_index, "Segment directory")->required();
  search->add_option("--query", search_query, "Query text")->required();
  search->add_option("--k", search_k, "Number of hits")->capture_default_str()->check(CLI::PositiveNumber);
  search->add_option("--redaction", search_redaction, "Redact PII in the printed hits")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();

  // dedup captions
  auto* dedup = app.add_subcommand("dedup", "Deduplicate corpora");
  dedup->require_subcommand(1);
  auto* captions = dedup->add_subcommand("captions", "Cluster image URLs by identical caption");
  std::string cap_input;
  std::string cap_format;
  std::string cap_field = "caption";
  std::string url_field = "url";
  std::string cap_output = "-";
  std::size_t cap_budget = DedupOptions{}.max_pairs_in_ram;
  bool cap_strict = false;
  captions->add_option("--input", cap_input, "Caption/URL file, or - for standard input")->required();
  captions->add_option("--format", cap_format, "Input format; inferred from the extension when omitted")
      ->check(CLI::IsMember({"jsonl", "json", "csv", "tsv"}));
  captions->add_option("--caption-field", cap_field, "Field holding the caption")->capture_default_str();
  captions->add_option("--url-field", url_field, "Field holding the URL")->capture_default_str();
  captions->add_option("--output", cap_output, "Cluster JSONL file, or - for standard output")->capture_default_str();
  captions->add_option("--ram-budget", cap_budget, "Pairs held in memory before spilling")->capture_default_str()->check(CLI::PositiveNumber);
  captions->add_flag("--strict", cap_strict, "Abort on the first malformed record");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve indices over HTTP");
  std::string serve_config;
  serve->add_option("--config", serve_config, "Federation config (JSON)")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (build->parsed()) {
      ShardPlan plan{shards, ram_budget};
      BuildOptions options;
      options.max_words = segment_words;
      options.jobs = jobs;
      options.on_warning = [&err](const std::string& w) { err << "warning: " << w << '\n'; };
      auto result = build_offline(build_in.source(), build_an.config(), plan, build_out, options,
                                  build_in.read_options(err));
      out << build_summary(result).dump() << '\n';
    } else if (stream->parsed()) {
      auto analyzer = make_analyzer(stream_an.config());
      DocumentReader reader(stream_in.source(), stream_in.read_options(err));
      BuildOptions options;
      options.max_words = stream_words;
      if (!stream_merge) {
        out << build_summary(build_streaming(reader, analyzer, stream_budget, stream_out, options)).dump() << '\n';
      } else {
        const std::filesystem::path final_dir = stream_out;
        const auto parts_dir = final_dir / ".parts";
        if (std::filesystem::exists(final_dir) && !std::filesystem::is_empty(final_dir))
          throw IndexError("output directory " + final_dir.string() + " is not empty");
        auto result = build_streaming(reader, analyzer, stream_budget, parts_dir, options);
        std::vector<std::shared_ptr<const Segment>> parts;
        for (const auto& p : result.segments) parts.push_back(Segment::open(p));
        const auto merged_tmp = final_dir.string() + ".merging";
        merge_segments(parts, merged_tmp);
        parts.clear();
        std::filesystem::remove_all(final_dir);
        std::filesystem::rename(merged_tmp, final_dir);
        result.segments = {final_dir};
        out << build_summary(result).dump() << '\n';
      }
    } else if (merge->parsed()) {
      std::vector<std::shared_ptr<const Segment>> inputs;
      for (const auto& dir : merge_inputs) inputs.push_back(Segment::open(dir));
      auto merged = merge_segments(inputs, merge_out);
      out << stats_json(*merged, 0, {}).dump() << '\n';
    } else if (stats->parsed()) {
      auto seg = Segment::open(stats_index);
      if (stats_verify) seg->verify();
      auto j = stats_json(*seg, stats_top, stats_terms);
      if (stats_verify) j["verified"] = true;
      out << j.dump(2) << '\n';
    } else if (search->parsed()) {
      Searcher searcher(Segment::open(search_index));
      auto hits = searcher.search_hydrated(search_query, search_k);
      if (search_redaction == "on") redact_hits(hits);
      for (const auto& hit : hits) out << hit_json(hit).dump() << '\n';
    } else if (captions->parsed()) {
      std::optional<SourceFormat> fmt;
      if (!cap_format.empty()) fmt = parse_format(cap_format);
      if (cap_input == "-" && !fmt) fmt = SourceFormat::jsonl;
      ReadOptions read;
      read.strict = cap_strict;
      read.on_skip = [&err](const CorpusError& e) { err << "warning: skipped " << e.what() << '\n'; };
      CaptionPairReader reader(CorpusSource::from_path(cap_input, fmt), cap_field, url_field, read);
      DedupOptions options;
      options.max_pairs_in_ram = cap_budget;
      auto result = dedup_captions(reader, options);
      if (cap_output == "-") {
        write_clusters_jsonl(out, result.clusters);
      } else {
        std::ofstream file(cap_output, std::ios::binary);
        if (!file) throw Error("cannot write " + cap_output);
        write_clusters_jsonl(file, result.clusters);
        file.close();
        if (!file) throw Error("cannot write " + cap_output);
      }
      err << "pairs read " << result.stats.pairs_read << ", accepted " << result.stats.pairs_accepted
          << ", empty captions skipped " << result.stats.empty_captions << ", malformed records skipped "
          << reader.skipped() << ", clusters " << result.clusters.size() << '\n';
    } else if (serve->parsed()) {
      auto service = std::make_shared<const FederationService>(FederationConfig::load(serve_config));
      HttpServer server(service);
      const int port = server.bind();
      err << "serving " << service->config().indices.size() << " indices on "
          << service->config().bind_address << ':' << port << '\n';
      return serve_until_signalled(server, err);
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace shardsearch::cli
