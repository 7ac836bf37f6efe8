#include "cli.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "omnitrace/omnitrace.hpp"

namespace omnitrace::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(md[i]);
  return out.str();
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::string utc_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(epoch));
    } catch (const std::exception&) {
      throw invalid_argument("SOURCE_DATE_EPOCH is not an integer");
    }
  } else {
    t = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run record written next to every output.
struct Manifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::string config_hash;
  std::string method;
  std::optional<std::uint64_t> seed;
  json parameters = json::object();
  std::vector<std::string> outputs;

  void write(const fs::path& dir) const {
    json in = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_hex(read_file(p))}});
    json j{{"subcommand", subcommand},
           {"inputs", std::move(in)},
           {"config_hash", config_hash},
           {"method", method},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"parameters", parameters},
           {"outputs", outputs},
           {"engine_version", kVersion},
           {"timestamp", utc_timestamp()}};
    write_file(dir / "manifest.json", j.dump(2) + "\n");
  }
};

/// Runs f(0..n-1) on up to `jobs` threads and rethrows the failure with the
/// lowest index.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max<std::size_t>(jobs, 1), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

std::string prf_line(const PRF& p) {
  return "P=" + fmt(p.precision) + " R=" + fmt(p.recall) + " F1=" + fmt(p.f1);
}

Segmenter make_segmenter(const std::string& abbreviations) {
  return abbreviations.empty() ? Segmenter() : Segmenter::from_file(abbreviations);
}

std::string resolve_config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("OMNITRACE_CONFIG"); env && *env) return env;
  return {};
}

std::vector<ExampleAttribution> load_predictions(const std::vector<std::string>& paths, std::size_t jobs) {
  std::vector<ExampleAttribution> out(paths.size());
  parallel_for(paths.size(), jobs, [&](std::size_t i) { out[i] = load_attribution(paths[i]); });
  return out;
}

/// Pairs each prediction with gold labels by example id. A single unnamed
/// gold file pairs with a single prediction.
std::vector<GoldLabels> match_gold(const std::vector<ExampleAttribution>& preds,
                                   const std::vector<std::string>& gold_paths) {
  std::vector<GoldLabels> golds;
  for (const auto& p : gold_paths) golds.push_back(load_gold(p));
  if (preds.size() == 1 && golds.size() == 1 && golds[0].example_id.empty()) return golds;
  std::map<std::string, const GoldLabels*> by_id;
  for (const auto& g : golds) {
    if (g.example_id.empty()) throw Error(ErrorCode::kGold, "gold file without example_id among several");
    if (!by_id.emplace(g.example_id, &g).second)
      throw Error(ErrorCode::kGold, "duplicate gold example id '" + g.example_id + "'");
  }
  std::vector<GoldLabels> out;
  for (const auto& p : preds) {
    auto it = by_id.find(p.example_id);
    if (it == by_id.end()) throw Error(ErrorCode::kGold, "no gold labels for example '" + p.example_id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::string attr_file_name(const std::vector<std::string>& traces, const std::string& example_id) {
  return traces.size() == 1 ? "attr.json" : example_id + ".attr.json";
}

void check_unique_ids(const std::vector<ExampleAttribution>& results) {
  std::set<std::string> seen;
  for (const auto& r : results)
    if (!seen.insert(r.example_id).second)
      throw validation_error("duplicate example id '" + r.example_id + "' across traces");
}

// ---------------------------------------------------------------- attribute

struct AttributeOptions {
  std::vector<std::string> traces;
  std::string config;
  std::string channel = "attmean";
  std::vector<std::string> ablate;
  bool multimodal = false;
  std::string abbreviations;
  std::string out;
  std::size_t jobs = 1;
};

int run_attribute(const AttributeOptions& o, std::ostream& out, std::ostream& err) {
  const std::string config_path = resolve_config_path(o.config);
  CurationConfig cfg = config_path.empty() ? CurationConfig{} : load_curation_config(config_path);
  for (const auto& a : o.ablate) {
    auto ab = ablation_from_string(a);
    if (!ab) throw invalid_argument("unknown ablation '" + a + "' (expected pos|conf_weight|conf|run|pmin)");
    cfg = ablate(cfg, *ab);
  }
  cfg.validate();
  const ChannelMethod method = ChannelMethod::parse(o.channel);
  const Segmenter segmenter = make_segmenter(o.abbreviations);

  json hashed{{"curation", to_json(cfg)},
              {"method", method.to_string()},
              {"multimodal", o.multimodal},
              {"abbreviations", o.abbreviations.empty() ? "default" : sha256_hex(read_file(o.abbreviations))}};
  const std::string config_hash = sha256_hex(hashed.dump());

  std::vector<ExampleAttribution> results(o.traces.size());
  std::vector<std::vector<std::string>> warnings(o.traces.size());
  parallel_for(o.traces.size(), o.jobs, [&](std::size_t i) {
    const Trace trace = load_trace(o.traces[i], &warnings[i], segmenter);
    auto chunks = o.multimodal ? attribute_multimodal(trace, cfg, method, segmenter)
                               : attribute(trace, cfg, method, segmenter);
    results[i] = make_example(trace, std::move(chunks), method.to_string(), config_hash);
  });
  check_unique_ids(results);

  const fs::path dir = prepare_out_dir(o.out);
  Manifest m;
  m.subcommand = "attribute";
  m.inputs = o.traces;
  if (!config_path.empty()) m.inputs.push_back(config_path);
  if (!o.abbreviations.empty()) m.inputs.push_back(o.abbreviations);
  m.config_hash = config_hash;
  m.method = method.to_string();
  m.parameters = {{"ablate", o.ablate}, {"multimodal", o.multimodal}, {"curation", to_json(cfg)}};
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (const auto& w : warnings[i]) err << "warning: " << o.traces[i] << ": " << w << "\n";
    const std::string name = attr_file_name(o.traces, results[i].example_id);
    std::ostringstream s;
    write_attribution(results[i], s);
    write_file(dir / name, s.str());
    m.outputs.push_back(name);
    std::size_t attributed = 0;
    for (const auto& c : results[i].chunks) attributed += c.selected.empty() ? 0 : 1;
    out << results[i].example_id << ": " << results[i].chunks.size() << " chunks, " << attributed
        << " attributed -> " << (dir / name).string() << "\n";
  }
  m.write(dir);
  return 0;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::vector<std::string> pred;
  std::vector<std::string> gold;
  std::string mode = "span";
  double bin = kDefaultBinSeconds;
  std::string time_scope = "chunk";
  std::string out;
  std::size_t jobs = 1;
};

json note_for_methods(const std::set<std::string>& methods) {
  json notes = json::array();
  if (methods.count("random"))
    notes.push_back(
        "random baseline selection sizes follow a pinned distribution (uniform over 0, 1, 2); scores are not "
        "comparable to published random-baseline numbers");
  return notes;
}

int run_evaluate(const EvaluateOptions& o, std::ostream& out) {
  if (o.mode != "span" && o.mode != "time" && o.mode != "option")
    throw invalid_argument("--mode must be span, time or option");
  if (o.time_scope != "chunk" && o.time_scope != "example")
    throw invalid_argument("--time-scope must be chunk or example");
  if (o.mode != "option" && o.gold.empty()) throw invalid_argument("--gold is required for span and time modes");
  if (!(o.bin > 0.0)) throw invalid_argument("--bin must be positive");

  const auto preds = load_predictions(o.pred, o.jobs);
  std::set<std::string> hashes, methods;
  for (const auto& p : preds) {
    hashes.insert(p.config_hash);
    methods.insert(p.method);
  }

  json report{{"mode", o.mode},
              {"config_hashes", hashes},
              {"methods", methods},
              {"notes", note_for_methods(methods)}};
  json examples = json::array();

  if (o.mode == "option") {
    report["metric"] = "option_consistency";
    std::vector<OptionConsistencyResult> results;
    for (const auto& p : preds) {
      auto r = option_consistency(p);
      json masses = json::object();
      for (const auto& [label, mass] : r.masses) masses[label] = mass;
      examples.push_back({{"example_id", p.example_id},
                          {"predicted_option", r.predicted_option ? json(*r.predicted_option) : json(nullptr)},
                          {"attribution_option", r.attribution_option ? json(*r.attribution_option) : json(nullptr)},
                          {"answer_chunk", r.answer_chunk ? json(*r.answer_chunk) : json(nullptr)},
                          {"masses", std::move(masses)},
                          {"consistent", r.consistent},
                          {"unparsable", r.unparsable}});
      results.push_back(std::move(r));
    }
    const auto s = summarize_consistency(results);
    report["examples"] = std::move(examples);
    report["summary"] = {{"consistent", s.consistent},
                         {"parsable", s.parsable},
                         {"unparsable", s.unparsable},
                         {"rate", s.rate()}};
    out << "option consistency " << fmt(s.rate()) << " (" << s.consistent << "/" << s.parsable << ", "
        << s.unparsable << " unparsable)\n";
  } else {
    const auto golds = match_gold(preds, o.gold);
    std::vector<PRF> all;
    report["metric"] = o.mode == "span" ? "span_prf" : "time_f1";
    if (o.mode == "time") {
      report["bin_s"] = o.bin;
      report["time_scope"] = o.time_scope;
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto per = o.mode == "span" ? evaluate_spans(preds[i], golds[i])
                                        : evaluate_time(preds[i], golds[i], o.bin, o.time_scope == "example");
      json chunks = json::array();
      for (const auto& p : per) chunks.push_back(to_json(p));
      examples.push_back({{"example_id", preds[i].example_id},
                          {"chunks", std::move(chunks)},
                          {"micro", to_json(aggregate_dataset(per, AverageMode::kMicro))},
                          {"macro", per.empty() ? json(nullptr) : to_json(aggregate_dataset(per, AverageMode::kMacro))}});
      all.insert(all.end(), per.begin(), per.end());
    }
    const PRF micro = aggregate_dataset(all, AverageMode::kMicro);
    report["examples"] = std::move(examples);
    report["summary"] = {{"micro", to_json(micro)}, {"chunks", all.size()}};
    out << "micro " << prf_line(micro);
    if (!all.empty()) {
      const PRF macro = aggregate_dataset(all, AverageMode::kMacro);
      report["summary"]["macro"] = to_json(macro);
      out << " | macro " << prf_line(macro);
    }
    out << " over " << all.size() << " chunks\n";
  }

  if (!o.out.empty()) {
    const fs::path dir = prepare_out_dir(o.out);
    write_file(dir / "report.json", report.dump(2) + "\n");
    Manifest m;
    m.subcommand = "evaluate";
    m.inputs = o.pred;
    m.inputs.insert(m.inputs.end(), o.gold.begin(), o.gold.end());
    m.config_hash = hashes.size() == 1 ? *hashes.begin() : std::string();
    m.method = methods.size() == 1 ? *methods.begin() : std::string();
    m.parameters = {{"mode", o.mode}, {"bin_s", o.bin}, {"time_scope", o.time_scope}};
    m.outputs = {"report.json"};
    m.write(dir);
  }
  return 0;
}

// ------------------------------------------------------------------ analyze

struct AnalyzeOptions {
  std::vector<std::string> pred;
  std::vector<std::string> gold;
  std::string quality;
  bool mass_weighted = false;
  std::size_t bins = 0;
  std::string out;
  std::size_t jobs = 1;
};

void finish_analysis(const std::string& kind, const AnalyzeOptions& o, const std::string& csv,
                     const std::vector<ExampleAttribution>& preds, std::ostream& out) {
  if (o.out.empty()) return;
  const fs::path dir = prepare_out_dir(o.out);
  const std::string name = kind + ".csv";
  write_file(dir / name, csv);
  Manifest m;
  m.subcommand = "analyze " + kind;
  m.inputs = o.pred;
  m.inputs.insert(m.inputs.end(), o.gold.begin(), o.gold.end());
  if (!o.quality.empty()) m.inputs.push_back(o.quality);
  std::set<std::string> hashes;
  for (const auto& p : preds) hashes.insert(p.config_hash);
  m.config_hash = hashes.size() == 1 ? *hashes.begin() : std::string();
  m.parameters = {{"mass_weighted", o.mass_weighted}, {"bins", o.bins}};
  m.outputs = {name};
  m.write(dir);
  out << "wrote " << (dir / name).string() << "\n";
}

int run_position(const AnalyzeOptions& o, std::ostream& out) {
  const auto preds = load_predictions(o.pred, o.jobs);
  const auto stats = position_cdf(preds, o.mass_weighted);
  out << "samples " << stats.samples.size() << "  mean position " << fmt(stats.mean) << "\n";
  std::ostringstream csv;
  csv << "position,cumulative\n" << std::setprecision(17);
  for (const auto& [p, c] : stats.cdf) csv << p << "," << c << "\n";
  finish_analysis("position", o, csv.str(), preds, out);
  return 0;
}

int run_calibration(const AnalyzeOptions& o, std::ostream& out) {
  const auto preds = load_predictions(o.pred, o.jobs);
  const auto golds = match_gold(preds, o.gold);
  std::vector<double> predicted, gold;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].chunks.size() != golds[i].chunk_count())
      throw Error(ErrorCode::kGold, "chunk count mismatch for example '" + preds[i].example_id + "'");
    for (std::size_t k = 0; k < preds[i].chunks.size(); ++k) {
      const auto p = predicted_image_fraction(preds[i].chunks[k], preds[i].sources);
      const auto g = gold_image_fraction(golds[i].chunks[k], preds[i].sources);
      if (!p || !g) {
        ++skipped;
        continue;
      }
      predicted.push_back(*p);
      gold.push_back(*g);
    }
  }
  const auto curve = calibration_curve(predicted, gold, o.bins ? o.bins : 10);
  std::ostringstream csv;
  csv << "lower,upper,mean_predicted,mean_gold,count\n" << std::setprecision(17);
  out << "bin              pred    gold    count\n";
  for (const auto& b : curve.bins) {
    csv << b.lower << "," << b.upper << "," << b.mean_predicted << "," << b.mean_gold << "," << b.count << "\n";
    out << "(" << fmt(b.lower) << "," << fmt(b.upper) << "]  " << fmt(b.mean_predicted) << "  "
        << fmt(b.mean_gold) << "  " << b.count << "\n";
  }
  out << predicted.size() << " chunks binned, " << skipped << " skipped (empty selection or gold)\n";
  finish_analysis("calibration", o, csv.str(), preds, out);
  return 0;
}

int run_quality(const AnalyzeOptions& o, std::ostream& out) {
  if (o.quality.empty()) throw invalid_argument("--quality is required");
  const auto preds = load_predictions(o.pred, o.jobs);
  const auto golds = match_gold(preds, o.gold);
  json q;
  try {
    q = json::parse(read_file(o.quality));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed quality file: ") + e.what());
  }
  if (!q.is_object()) throw Error(ErrorCode::kParse, "quality file must map example ids to values");

  std::map<std::string, double> f1;
  std::map<std::string, QualityValue> quality;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& id = preds[i].example_id;
    f1[id] = aggregate_dataset(evaluate_spans(preds[i], golds[i]), AverageMode::kMicro).f1;
    auto it = q.find(id);
    if (it == q.end()) throw invalid_argument("example '" + id + "' has no quality value");
    if (it->is_boolean()) {
      quality[id] = it->get<bool>();
    } else if (it->is_number()) {
      quality[id] = it->get<double>();
    } else if (it->is_object() && it->contains("reference") && (*it)["reference"].is_string()) {
      quality[id] = rouge_l(preds[i].generated_text, (*it)["reference"].get<std::string>());
    } else {
      throw Error(ErrorCode::kParse, "quality value for '" + id + "' must be a bool, a number or {\"reference\": text}");
    }
  }
  const auto groups = group_by_quality(f1, quality, o.bins ? o.bins : 5);
  std::ostringstream csv;
  csv << "group,count,mean_f1\n" << std::setprecision(17);
  for (const auto& g : groups) {
    csv << g.label << "," << g.count << ",";
    if (g.mean_f1) csv << *g.mean_f1;
    csv << "\n";
    out << std::left << std::setw(12) << g.label << " n=" << g.count << "  F1="
        << (g.mean_f1 ? fmt(*g.mean_f1) : std::string("-")) << "\n";
  }
  finish_analysis("quality", o, csv.str(), preds, out);
  return 0;
}

// ----------------------------------------------------------------- baseline

struct BaselineOptions {
  std::vector<std::string> traces;
  std::string embeddings;
  double threshold = kDefaultEmbeddingThreshold;
  std::optional<std::uint64_t> seed;
  std::vector<double> k_weights;
  std::string abbreviations;
  std::string out;
  std::size_t jobs = 1;
};

int run_baseline(const std::string& kind, const BaselineOptions& o, std::ostream& out) {
  const Segmenter segmenter = make_segmenter(o.abbreviations);
  json params;
  std::vector<std::string> extra_inputs;
  if (kind == "random") {
    if (!o.seed) throw invalid_argument("baseline random requires --seed");
    params = {{"seed", *o.seed}, {"k_weights", o.k_weights.empty() ? std::vector<double>{1, 1, 1} : o.k_weights}};
  } else {
    if (o.embeddings.empty()) throw invalid_argument("baseline embed requires --embeddings");
    params = {{"threshold", o.threshold}, {"embeddings", sha256_hex(read_file(o.embeddings))}};
    extra_inputs.push_back(o.embeddings);
  }
  params["abbreviations"] = o.abbreviations.empty() ? "default" : sha256_hex(read_file(o.abbreviations));
  const std::string hash = sha256_hex(json{{"baseline", kind}, {"parameters", params}}.dump());

  std::optional<EmbeddingTable> table;
  if (kind == "embed") table = load_embeddings(o.embeddings);

  std::vector<ExampleAttribution> results(o.traces.size());
  parallel_for(o.traces.size(), o.jobs, [&](std::size_t i) {
    const Trace trace = load_trace(o.traces[i], nullptr, segmenter);
    const auto chunks = segment_output(trace, segmenter);
    std::vector<SpanAttribution> attrs;
    if (kind == "random") {
      attrs = random_attribute(trace.sources, chunks, *o.seed, o.k_weights);
    } else {
      EmbeddingTable t = *table;
      for (const auto& s : trace.sources)
        if (s.embedding && !t.sources.count(s.id)) {
          if (t.sources.empty() && t.chunks.empty()) t.dimension = s.embedding->size();
          t.sources[s.id] = *s.embedding;
        }
      attrs = embed_attribute(t, chunks, o.threshold);
    }
    results[i] = make_example(trace, std::move(attrs), kind, hash);
  });
  check_unique_ids(results);

  const fs::path dir = prepare_out_dir(o.out);
  Manifest m;
  m.subcommand = "baseline " + kind;
  m.inputs = o.traces;
  m.inputs.insert(m.inputs.end(), extra_inputs.begin(), extra_inputs.end());
  if (!o.abbreviations.empty()) m.inputs.push_back(o.abbreviations);
  m.config_hash = hash;
  m.method = kind;
  m.seed = o.seed;
  m.parameters = params;
  for (const auto& r : results) {
    const std::string name = attr_file_name(o.traces, r.example_id);
    std::ostringstream s;
    write_attribution(r, s);
    write_file(dir / name, s.str());
    m.outputs.push_back(name);
    out << r.example_id << ": " << r.chunks.size() << " chunks -> " << (dir / name).string() << "\n";
  }
  m.write(dir);
  return 0;
}

// -------------------------------------------------------------------- synth

struct SynthOptions {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t count = 1;
  std::size_t jobs = 1;
};

int run_synth(const SynthOptions& o, std::ostream& out) {
  if (!o.seed) throw invalid_argument("synth requires --seed");
  if (o.count == 0) throw invalid_argument("--count must be positive");
  const SynthSpec base = load_synth_spec(o.spec);
  std::vector<SynthExample> made(o.count);
  parallel_for(o.count, o.jobs, [&](std::size_t i) {
    SynthSpec spec = base;
    spec.seed = *o.seed + i;
    if (!spec.example_id.empty() && o.count > 1) spec.example_id += "-" + std::to_string(i);
    made[i] = generate_trace(spec);
  });
  const fs::path dir = prepare_out_dir(o.out);
  Manifest m;
  m.subcommand = "synth";
  m.inputs = {o.spec};
  m.seed = o.seed;
  m.parameters = {{"count", o.count}};
  std::set<std::string> seen;
  for (const auto& ex : made) {
    const auto& id = ex.trace.example_id;
    if (!seen.insert(id).second) throw validation_error("duplicate example id '" + id + "'");
    write_file(dir / (id + ".trace.jsonl"), serialize_trace(ex.trace));
    std::ostringstream g;
    serialize_gold(ex.gold, g);
    write_file(dir / (id + ".gold.json"), g.str());
    m.outputs.push_back(id + ".trace.jsonl");
    m.outputs.push_back(id + ".gold.json");
  }
  m.write(dir);
  out << "wrote " << made.size() << " trace/gold pairs to " << dir.string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- validate

struct ValidateOptions {
  std::vector<std::string> traces;
  std::string gold;
  std::string abbreviations;
};

int run_validate(const ValidateOptions& o, std::ostream& out, std::ostream& err) {
  if (!o.gold.empty() && o.traces.size() != 1) throw invalid_argument("--gold needs exactly one --trace");
  const Segmenter segmenter = make_segmenter(o.abbreviations);
  for (const auto& path : o.traces) {
    std::vector<std::string> warnings;
    const Trace trace = load_trace(path, &warnings, segmenter);
    for (const auto& w : warnings) err << "warning: " << path << ": " << w << "\n";
    const auto chunks = segment_output(trace, segmenter);
    out << "OK " << path << ": " << trace.timeline.size() << " input tokens, " << trace.sources.size()
        << " sources, " << trace.steps.size() << " steps, " << chunks.size() << " chunks\n";
    if (!o.gold.empty()) {
      std::ifstream in(o.gold, std::ios::binary);
      if (!in) throw Error(ErrorCode::kIo, "cannot open gold file " + o.gold);
      const auto gold = validate_gold(in, trace, segmenter);
      out << "OK " << o.gold << ": " << gold.chunk_count() << " chunks\n";
    }
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Span-level multimodal attribution over generation traces", "omnitrace"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  AttributeOptions ao;
  auto* attribute_cmd = app.add_subcommand("attribute", "Attribute each generated sentence to input sources");
  attribute_cmd->add_option("--trace", ao.traces, "Trace file (.trace.jsonl), repeatable")->required();
  attribute_cmd->add_option("--config", ao.config, "Curation config (TOML); falls back to $OMNITRACE_CONFIG");
  attribute_cmd->add_option("--channel", ao.channel, "attmean | rawatt | raw:<channel>")->capture_default_str();
  attribute_cmd->add_option("--ablate", ao.ablate, "Disable a component: pos|conf_weight|conf|run|pmin");
  attribute_cmd->add_flag("--multimodal", ao.multimodal, "Curate modality groups separately and union them");
  attribute_cmd->add_option("--abbreviations", ao.abbreviations, "Abbreviation list for sentence splitting");
  attribute_cmd->add_option("--out", ao.out, "Output directory")->required();
  attribute_cmd->add_option("--jobs", ao.jobs, "Parallel input files")->check(CLI::PositiveNumber);

  EvaluateOptions eo;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score attributions against gold labels");
  evaluate_cmd->add_option("--pred", eo.pred, "Attribution file (attr.json), repeatable")->required();
  evaluate_cmd->add_option("--gold", eo.gold, "Gold file (.gold.json), repeatable");
  evaluate_cmd->add_option("--mode", eo.mode, "span | time | option")->capture_default_str();
  evaluate_cmd->add_option("--bin", eo.bin, "Time bin width in seconds")->capture_default_str();
  evaluate_cmd->add_option("--time-scope", eo.time_scope, "chunk | example")->capture_default_str();
  evaluate_cmd->add_option("--out", eo.out, "Output directory for report.json");
  evaluate_cmd->add_option("--jobs", eo.jobs, "Parallel input files")->check(CLI::PositiveNumber);

  AnalyzeOptions an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Dataset-level analyses of attributions");
  analyze_cmd->require_subcommand(1);
  auto add_common = [&](CLI::App* c) {
    c->add_option("--pred", an.pred, "Attribution file, repeatable")->required();
    c->add_option("--out", an.out, "Output directory for the CSV");
    c->add_option("--jobs", an.jobs, "Parallel input files")->check(CLI::PositiveNumber);
  };
  auto* position_cmd = analyze_cmd->add_subcommand("position", "CDF of selected-source positions");
  add_common(position_cmd);
  position_cmd->add_flag("--mass-weighted", an.mass_weighted, "Weight samples by p_mass");
  auto* calibration_cmd = analyze_cmd->add_subcommand("calibration", "Predicted vs gold image-mass calibration");
  add_common(calibration_cmd);
  calibration_cmd->add_option("--gold", an.gold, "Gold file, repeatable")->required();
  calibration_cmd->add_option("--bins", an.bins, "Bin count (default 10)");
  auto* quality_cmd = analyze_cmd->add_subcommand("quality", "Attribution F1 grouped by generation quality");
  add_common(quality_cmd);
  quality_cmd->add_option("--gold", an.gold, "Gold file, repeatable")->required();
  quality_cmd->add_option("--quality", an.quality, "JSON map: example id -> bool | score | {reference}")->required();
  quality_cmd->add_option("--bins", an.bins, "Score bins (default 5)");

  BaselineOptions bo;
  std::uint64_t baseline_seed = 0;
  auto* baseline_cmd = app.add_subcommand("baseline", "Non-attention baselines");
  baseline_cmd->require_subcommand(1);
  auto add_baseline_common = [&](CLI::App* c) {
    c->add_option("--trace", bo.traces, "Trace file, repeatable")->required();
    c->add_option("--abbreviations", bo.abbreviations, "Abbreviation list for sentence splitting");
    c->add_option("--out", bo.out, "Output directory")->required();
    c->add_option("--jobs", bo.jobs, "Parallel input files")->check(CLI::PositiveNumber);
  };
  auto* embed_cmd = baseline_cmd->add_subcommand("embed", "Cosine-similarity matching");
  add_baseline_common(embed_cmd);
  embed_cmd->add_option("--embeddings", bo.embeddings, "Embedding sidecar (text)")->required();
  embed_cmd->add_option("--threshold", bo.threshold, "Cosine threshold")->capture_default_str();
  auto* random_cmd = baseline_cmd->add_subcommand("random", "Seeded random matching");
  add_baseline_common(random_cmd);
  auto* random_seed = random_cmd->add_option("--seed", baseline_seed, "Random seed");
  random_cmd->add_option("--k-weights", bo.k_weights, "Weights of selection sizes 0, 1, 2, ...")->delimiter(',');

  SynthOptions so;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic traces with planted ground truth");
  synth_cmd->add_option("--spec", so.spec, "Synth spec (TOML)")->required();
  synth_cmd->add_option("--out", so.out, "Output directory")->required();
  auto* synth_seed_opt = synth_cmd->add_option("--seed", synth_seed, "Base seed");
  synth_cmd->add_option("--count", so.count, "Number of examples (seeds seed .. seed+count-1)");
  synth_cmd->add_option("--jobs", so.jobs, "Parallel generation")->check(CLI::PositiveNumber);

  ValidateOptions vo;
  auto* validate_cmd = app.add_subcommand("validate", "Check trace (and gold) files");
  validate_cmd->add_option("--trace", vo.traces, "Trace file, repeatable")->required();
  validate_cmd->add_option("--gold", vo.gold, "Gold file for a single trace");
  validate_cmd->add_option("--abbreviations", vo.abbreviations, "Abbreviation list for sentence splitting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*attribute_cmd) return run_attribute(ao, out, err);
    if (*evaluate_cmd) return run_evaluate(eo, out);
    if (*position_cmd) return run_position(an, out);
    if (*calibration_cmd) return run_calibration(an, out);
    if (*quality_cmd) return run_quality(an, out);
    if (*embed_cmd) return run_baseline("embed", bo, out);
    if (*random_cmd) {
      if (random_seed->count()) bo.seed = baseline_seed;
      return run_baseline("random", bo, out);
    }
    if (*synth_cmd) {
      if (synth_seed_opt->count()) so.seed = synth_seed;
      return run_synth(so, out);
    }
    if (*validate_cmd) return run_validate(vo, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace omnitrace::cli
