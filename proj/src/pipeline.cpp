// SPDX-License-Identifier: Apache-2.0
#include "intent/pipeline.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "intent/checkpoint.hpp"
#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"
#include "intent/judge.hpp"
#include "intent/metrics.hpp"
#include "intent/text.hpp"

namespace intent {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::synth: return "synth";
    case Stage::train: return "train";
    case Stage::classify_eval: return "classify-eval";
    case Stage::generate: return "generate";
    case Stage::judge: return "judge";
    case Stage::report: return "report";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kAllStages)
    if (stage_name(s) == name) return s;
  return std::nullopt;
}

fs::path RunConfig::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

std::uint64_t RunConfig::synth_seed() const { return mix_seed(seed, 1); }
std::uint64_t RunConfig::split_seed() const { return mix_seed(seed, 2); }
std::uint64_t RunConfig::model_seed() const { return mix_seed(seed, 3); }
std::uint64_t RunConfig::train_seed() const { return mix_seed(seed, 4); }
std::uint64_t RunConfig::shuffle_seed(std::string_view user_id) const {
  return mix_seed(mix_seed(seed, 5), fnv1a64(user_id));
}

namespace {

void check_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(std::string(where) + ": unknown field '" + key + "'");
}

// Accepts exactly the fields that T serializes.
template <typename T>
T parse_checked(const nlohmann::json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const nlohmann::json known = T{};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError(std::string(where) + ": unknown field '" + key + "'");
  return j.get<T>();
}

GenSpec parse_gen_spec(const nlohmann::json& j) {
  check_keys(j, "synth",
             {"n_sessions", "class_proportions", "page_count_mean", "page_count_sd", "page_count_cap",
              "signal_pages_min", "signal_pages_max", "signal_window", "noise_vocab"});
  GenSpec g;
  g.n_sessions = j.value("n_sessions", g.n_sessions);
  if (j.contains("class_proportions")) {
    g.class_proportions = {};
    for (const auto& [code, frac] : j.at("class_proportions").items()) {
      const auto c = parse_class_code(code);
      if (!c) throw ConfigError("synth.class_proportions: unknown class '" + code + "'");
      g.class_proportions[index_of(*c)] = frac.get<double>();
    }
  }
  g.page_count_mean = j.value("page_count_mean", g.page_count_mean);
  g.page_count_sd = j.value("page_count_sd", g.page_count_sd);
  g.page_count_cap = j.value("page_count_cap", g.page_count_cap);
  g.signal_pages_min = j.value("signal_pages_min", g.signal_pages_min);
  g.signal_pages_max = j.value("signal_pages_max", g.signal_pages_max);
  g.signal_window = j.value("signal_window", g.signal_window);
  g.noise_vocab = j.value("noise_vocab", g.noise_vocab);
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  return g;
}

GatewayConfig parse_gateway(const nlohmann::json& j, std::string_view where) {
  if (j.contains("api_key"))
    throw ConfigError(std::string(where) + ": API keys are read from the environment variable "
                      "named by api_key_env, never from the config file");
  check_keys(j, where,
             {"endpoint", "api_key_env", "model", "temperature", "max_tokens", "timeout_s",
              "max_retries", "backoff_base_s", "backoff_max_s", "max_in_flight"});
  GatewayConfig g = j.get<GatewayConfig>();
  try {
    // The endpoint may be supplied later by --endpoint-override or --mock.
    GatewayConfig probe = g;
    if (probe.endpoint.empty()) probe.endpoint = "unset";
    probe.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
  return g;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"run_id", "output_dir", "seed", "corpus", "synth", "min_pages", "split",
              "vocab_min_freq", "model", "train", "grid", "probe", "classify_baseline", "lexicon",
              "generator", "judge", "variants", "M", "eval_split", "max_users", "human_labels",
              "golden_report", "mock_fixture"});
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.run_id = j.value("run_id", c.run_id);
    if (c.run_id.empty() || c.run_id.find('/') != std::string::npos || c.run_id == "." ||
        c.run_id == "..")
      throw ConfigError("run_id must be a plain non-empty name");
    c.output_dir = c.resolve(j.value("output_dir", c.output_dir.string()));
    c.seed = j.value("seed", c.seed);
    if (j.contains("corpus")) c.corpus_path = c.resolve(j.at("corpus").get<std::string>());
    if (j.contains("synth")) c.synth = parse_gen_spec(j.at("synth"));
    c.min_pages = j.value("min_pages", c.min_pages);
    if (c.min_pages < 1) throw ConfigError("min_pages must be >= 1");
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, "split", {"train", "val", "test"});
      c.split = {s.value("train", 0.8), s.value("val", 0.1), s.value("test", 0.1)};
    }
    c.vocab_min_freq = j.value("vocab_min_freq", c.vocab_min_freq);
    if (j.contains("model")) c.model = parse_checked<ModelConfig>(j.at("model"), "model");
    if (j.contains("train")) c.train = parse_checked<TrainOptions>(j.at("train"), "train");
    if (j.contains("grid")) c.grid = parse_checked<GridSpec>(j.at("grid"), "grid");
    if (j.contains("probe")) {
      const auto& p = j.at("probe");
      check_keys(p, "probe", {"n_sessions", "epochs"});
      ProbeSettings ps;
      ps.n_sessions = p.value("n_sessions", ps.n_sessions);
      ps.epochs = p.value("epochs", ps.epochs);
      c.probe = ps;
    }
    if (j.contains("classify_baseline"))
      c.classify_baseline = parse_gateway(j.at("classify_baseline"), "classify_baseline");
    if (j.contains("lexicon")) c.lexicon = j.at("lexicon").get<ClassLexicon>();
    if (j.contains("generator")) c.generator = parse_gateway(j.at("generator"), "generator");
    if (j.contains("judge")) c.judge = parse_gateway(j.at("judge"), "judge");
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) {
        const auto parsed = parse_variant(v.get<std::string>());
        if (!parsed) throw ConfigError("variants: unknown variant '" + v.get<std::string>() + "'");
        c.variants.push_back(*parsed);
      }
      if (c.variants.empty()) throw ConfigError("variants must not be empty");
    }
    c.m = j.value("M", c.m);
    if (c.m < 1) throw ConfigError("M must be >= 1");
    if (j.contains("eval_split")) {
      const auto s = parse_split(j.at("eval_split").get<std::string>());
      if (!s) throw ConfigError("eval_split must be train, val or test");
      c.eval_split = *s;
    }
    c.max_users = j.value("max_users", c.max_users);
    if (j.contains("human_labels")) c.human_labels = c.resolve(j.at("human_labels").get<std::string>());
    if (j.contains("golden_report")) c.golden_report = c.resolve(j.at("golden_report").get<std::string>());
    if (j.contains("mock_fixture")) c.mock_fixture = c.resolve(j.at("mock_fixture").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, fs::absolute(path).parent_path());
}

void override_endpoints(RunConfig& config, const std::string& endpoint) {
  for (auto* g : {&config.classify_baseline, &config.generator, &config.judge})
    if (*g) (*g)->endpoint = endpoint;
}

std::string dump_artifact(const ojson& j) { return j.dump(2) + "\n"; }

namespace {

fs::path artifact_path(const RunConfig& c, std::string_view name) { return c.run_dir() / name; }

fs::path require(const RunConfig& c, std::string_view name, std::string_view stage) {
  auto p = artifact_path(c, name);
  if (!fs::exists(p))
    throw PrerequisiteError(std::string(stage) + " needs " + p.string() + " (run the stage that produces " +
                            std::string(name) + " first)");
  return p;
}

std::string jsonl(const std::vector<ojson>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> rows;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string model_display_name(const ModelConfig& c) {
  return c.variant == Variant::LongformerPlus ? "Longformer+" : "Longformer";
}

std::vector<const LabeledSession*> eval_items(const RunConfig& config, const Corpus& corpus) {
  auto items = corpus.subset(config.eval_split);
  if (config.max_users > 0 && items.size() > config.max_users) items.resize(config.max_users);
  if (items.empty())
    throw PrerequisiteError(std::string("corpus has no items in split '") +
                            std::string(split_name(config.eval_split)) + "'");
  return items;
}

void log_epoch(const EpochRecord& r) {
  std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " val wP "
            << r.val_weighted_precision << " wR " << r.val_weighted_recall << " wF1 "
            << r.val_weighted_f1 << '\n';
}

template <typename T>
void train_and_save(const RunConfig& config, const Corpus& corpus, const Vocab& vocab) {
  ModelConfig cfg = config.model;
  cfg.vocab_size = vocab.size();
  cfg.seed = config.model_seed();
  TrainOptions opts = config.train;
  opts.seed = config.train_seed();
  opts.on_epoch = log_epoch;
  cfg.validate();

  const auto train_set = prepare_examples(corpus, Split::train, vocab, cfg);
  const auto val_set = prepare_examples(corpus, Split::val, vocab, cfg);

  ojson history;
  if (config.grid) {
    const auto grid = grid_search<T>(cfg, opts, *config.grid, train_set, val_set);
    history["grid"] = to_json(grid);
    cfg = grid.best_config;
    opts = grid.best_options;
  }
  auto result = train(init_params<T>(cfg), train_set, val_set, opts);
  history["best_epoch"] = result.best_epoch;
  history["config"] = nlohmann::json(cfg);
  history["options"] = nlohmann::json(opts);
  history["history"] = to_json(result.history);
  save_checkpoint(result.params, artifact_path(config, artifact::kCheckpoint));
  write_file_atomic(artifact_path(config, artifact::kHistory), dump_artifact(history));
}

template <typename T>
ojson run_probe(const RunConfig& config) {
  GenSpec spec = config.synth;
  spec.n_sessions = config.probe->n_sessions;
  spec.seed = mix_seed(config.synth_seed(), 0x9B0BE);
  const Corpus probe =
      split_corpus(filter_min_pages(plant_position_probe(spec), config.min_pages), config.split,
                   config.split_seed());
  const Vocab vocab = build_vocab(probe, config.vocab_min_freq);
  ojson out;
  out["n_sessions"] = probe.items.size();
  out["epochs"] = config.probe->epochs;
  ojson models = ojson::array();
  for (Variant v : {Variant::LongformerPlus, Variant::Longformer}) {
    ModelConfig cfg = config.model;
    cfg.vocab_size = vocab.size();
    cfg.seed = config.model_seed();
    cfg.variant = v;
    TrainOptions opts = config.train;
    opts.seed = config.train_seed();
    opts.epochs = config.probe->epochs;
    const auto train_set = prepare_examples(probe, Split::train, vocab, cfg);
    const auto val_set = prepare_examples(probe, Split::val, vocab, cfg);
    const auto test_set = prepare_examples(probe, Split::test, vocab, cfg);
    const auto res = train(init_params<T>(cfg), train_set, val_set, opts);
    ojson row;
    row["model"] = model_display_name(cfg);
    row["best_epoch"] = res.best_epoch;
    row["val_accuracy"] = res.history[res.best_epoch - 1].val_accuracy;
    row["test_accuracy"] = evaluate(res.params, test_set).accuracy;
    models.push_back(std::move(row));
  }
  out["models"] = std::move(models);
  return out;
}

template <typename T>
std::vector<Prediction> predict_items(const ModelParams<T>& params, const Vocab& vocab,
                                      const std::vector<const LabeledSession*>& items) {
  std::vector<Prediction> out(items.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = predict(params, items[static_cast<std::size_t>(i)]->session, vocab);
  return out;
}

std::vector<Prediction> load_and_predict(const RunConfig& config, std::string_view stage,
                                         const std::vector<const LabeledSession*>& items) {
  const Vocab vocab = Vocab::load(require(config, artifact::kVocab, stage));
  const auto ckpt = require(config, artifact::kCheckpoint, stage);
  if (config.model.precision == Precision::f64)
    return predict_items(load_checkpoint<double>(ckpt), vocab, items);
  return predict_items(load_checkpoint<float>(ckpt), vocab, items);
}

Session truncated_for_prompt(const RunConfig& config, const Session& s) {
  return truncate_session(s, truncation_for(config.model));
}

ojson report_entry(const std::string& name, const ClassReport& r) {
  return {{"name", name}, {"report", to_json(r)}};
}

}  // namespace

void run_synth(const RunConfig& config) {
  fs::create_directories(config.run_dir());
  Corpus corpus;
  if (config.corpus_path) {
    corpus = filter_min_pages(load_corpus(*config.corpus_path), config.min_pages);
    const bool tagged = std::all_of(corpus.items.begin(), corpus.items.end(),
                                    [](const LabeledSession& s) { return s.split.has_value(); });
    if (!tagged) corpus = split_corpus(corpus, config.split, config.split_seed());
  } else {
    GenSpec spec = config.synth;
    spec.seed = config.synth_seed();
    corpus = split_corpus(filter_min_pages(generate_corpus(spec), config.min_pages), config.split,
                          config.split_seed());
  }
  save_corpus(corpus, artifact_path(config, artifact::kCorpus));
  std::cerr << "synth: " << corpus.items.size() << " sessions\n";
}

void run_train(const RunConfig& config) {
  const Corpus corpus = load_corpus(require(config, artifact::kCorpus, "train"));
  const Vocab vocab = build_vocab(corpus, config.vocab_min_freq);
  vocab.save(artifact_path(config, artifact::kVocab));
  if (config.model.precision == Precision::f64)
    train_and_save<double>(config, corpus, vocab);
  else
    train_and_save<float>(config, corpus, vocab);
  if (config.probe) {
    const ojson probe = config.model.precision == Precision::f64 ? run_probe<double>(config)
                                                                  : run_probe<float>(config);
    write_file_atomic(artifact_path(config, artifact::kProbe), dump_artifact(probe));
  }
}

void run_classify_eval(const RunConfig& config) {
  const Corpus corpus = load_corpus(require(config, artifact::kCorpus, "classify-eval"));
  const auto items = eval_items(config, corpus);
  const auto preds = load_and_predict(config, "classify-eval", items);

  std::vector<IntentClass> golds;
  std::vector<std::optional<IntentClass>> labels;
  std::vector<ojson> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    golds.push_back(items[i]->label);
    labels.push_back(preds[i].label);
    rows.push_back({{"user_id", items[i]->session.user_id},
                    {"gold", class_code(items[i]->label)},
                    {"pred", class_code(preds[i].label)},
                    {"probs", preds[i].probs}});
  }
  write_file_atomic(artifact_path(config, artifact::kPredictions), jsonl(rows));

  std::vector<std::pair<std::string, ClassReport>> reports;
  reports.emplace_back(model_display_name(config.model), eval_report(labels, golds));

  if (config.classify_baseline) {
    ChatClient client(*config.classify_baseline);
    std::vector<ChatRequest> requests;
    for (const auto* it : items)
      requests.push_back(client.make_request(
          {{"user", build_classification_prompt(truncated_for_prompt(config, it->session))}}));
    const auto outputs = client.complete_all(requests);
    std::vector<std::optional<IntentClass>> matched;
    std::vector<ojson> brows;
    for (std::size_t i = 0; i < items.size(); ++i) {
      matched.push_back(match_text_to_class(outputs[i], config.lexicon));
      brows.push_back({{"user_id", items[i]->session.user_id},
                       {"gold", class_code(items[i]->label)},
                       {"pred", matched.back() ? ojson(class_code(*matched.back())) : ojson()},
                       {"output", outputs[i]}});
    }
    write_file_atomic(artifact_path(config, artifact::kBaselinePredictions), jsonl(brows));
    reports.emplace_back("Text-to-text baseline", eval_report(matched, golds));
  }

  ojson out;
  out["split"] = split_name(config.eval_split);
  out["models"] = ojson::array();
  for (const auto& [name, r] : reports) out["models"].push_back(report_entry(name, r));
  write_file_atomic(artifact_path(config, artifact::kClassifyReport), dump_artifact(out));
  write_file_atomic(artifact_path(config, artifact::kClassifyReportMd), markdown_table(reports));
}

void run_generate(const RunConfig& config) {
  if (!config.generator) throw ConfigError("generate needs a 'generator' gateway config");
  const Corpus corpus = load_corpus(require(config, artifact::kCorpus, "generate"));
  const auto items = eval_items(config, corpus);
  const bool needs_model = std::find(config.variants.begin(), config.variants.end(),
                                     GenVariant::UsePredicted) != config.variants.end();
  std::vector<Prediction> preds;
  if (needs_model) preds = load_and_predict(config, "generate (use_predicted)", items);

  std::vector<ChatRequest> requests;
  std::vector<ojson> rows;
  ChatClient client(*config.generator);
  for (GenVariant v : config.variants)
    for (std::size_t i = 0; i < items.size(); ++i) {
      GenRequest req;
      req.session = truncated_for_prompt(config, items[i]->session);
      req.variant = v;
      if (v == GenVariant::UsePredicted) req.conditioning_class = preds[i].label;
      if (v == GenVariant::UseGroundTruth) req.conditioning_class = items[i]->label;
      req.m = config.m;
      req.shuffle_seed = config.shuffle_seed(items[i]->session.user_id);
      req.validate();
      requests.push_back(client.make_request({{"user", build_generation_prompt(req)}}));
      rows.push_back({{"user_id", items[i]->session.user_id},
                      {"variant", variant_name(v)},
                      {"conditioning_class",
                       req.conditioning_class ? ojson(class_code(*req.conditioning_class)) : ojson()}});
    }
  const auto outputs = client.complete_all(requests);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cands;
    try {
      cands = parse_candidates(outputs[i], config.m);
    } catch (const ParseError& e) {
      std::cerr << "warning: no enumerated candidates for " << rows[i]["user_id"].get<std::string>()
                << " (" << rows[i]["variant"].get<std::string>() << "); counted as misses\n";
      rows[i]["parse_error"] = true;
    }
    rows[i]["candidates"] = cands;
  }
  write_file_atomic(artifact_path(config, artifact::kCandidates), jsonl(rows));
}

void run_judge(const RunConfig& config) {
  if (!config.judge) throw ConfigError("judge needs a 'judge' gateway config");
  const Corpus corpus = load_corpus(require(config, artifact::kCorpus, "judge"));
  const auto candidates = read_jsonl(require(config, artifact::kCandidates, "judge"));
  std::map<std::string, std::string> intents;
  for (const auto& it : corpus.items) intents[it.session.user_id] = it.intent;

  struct Key {
    std::string variant, user_id;
    std::size_t rank;
  };
  std::vector<Key> keys;
  std::vector<JudgePair> pairs;
  for (const auto& row : candidates) {
    const auto user = row.at("user_id").get<std::string>();
    const auto found = intents.find(user);
    if (found == intents.end()) throw ParseError("candidates mention unknown user " + user);
    const auto cands = row.at("candidates").get<std::vector<std::string>>();
    for (std::size_t r = 0; r < cands.size(); ++r) {
      keys.push_back({row.at("variant").get<std::string>(), user, r + 1});
      pairs.push_back({found->second, cands[r]});
    }
  }
  ChatClient client(*config.judge);
  const auto outcomes = judge_all(client, pairs);
  std::vector<ojson> rows;
  for (std::size_t i = 0; i < keys.size(); ++i)
    rows.push_back({{"user_id", keys[i].user_id},
                    {"rank", keys[i].rank},
                    {"verdict", outcomes[i].verdict ? 1 : 0},
                    {"variant", keys[i].variant}});
  write_file_atomic(artifact_path(config, artifact::kJudgments), jsonl(rows));
}

namespace {

std::map<std::string, bool> load_human_labels(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::map<std::string, bool> out;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = text::trim(line);
    if (t.empty() || (lineno == 1 && text::starts_with_icase(t, "pair_id"))) continue;
    const auto comma = t.rfind(',');
    const std::string label = comma == std::string::npos ? "" : text::trim(t.substr(comma + 1));
    if (label != "0" && label != "1")
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected pair_id,0|1");
    out[text::trim(t.substr(0, comma))] = label == "1";
  }
  return out;
}

ojson similar_json(const SimilarAt& s) {
  return {{"hits", s.hits}, {"users", s.users}, {"value", s.value()}};
}

}  // namespace

ojson build_report(const RunConfig& config) {
  ojson report;
  report["run_id"] = config.run_id;
  report["seed"] = config.seed;

  const auto cls_path = artifact_path(config, artifact::kClassifyReport);
  report["classification"] = fs::exists(cls_path) ? ojson::parse(read_file(cls_path)) : ojson();

  const auto cand_path = artifact_path(config, artifact::kCandidates);
  const auto judg_path = artifact_path(config, artifact::kJudgments);
  report["generation"] = ojson();
  report["agreement"] = ojson();
  if (fs::exists(cand_path) && fs::exists(judg_path)) {
    const auto candidates = read_jsonl(cand_path);
    const auto judgments = read_jsonl(judg_path);
    ojson gen;
    gen["M"] = config.m;
    gen["variants"] = ojson::array();
    for (GenVariant v : config.variants) {
      const std::string name(variant_name(v));
      std::vector<std::string> users;
      std::size_t n_candidates = 0, short_lists = 0;
      for (const auto& row : candidates)
        if (row.at("variant") == name) {
          users.push_back(row.at("user_id").get<std::string>());
          const std::size_t k = row.at("candidates").size();
          n_candidates += k;
          short_lists += k < config.m;
        }
      if (users.empty()) continue;
      std::vector<JudgmentRecord> records;
      for (const auto& row : judgments)
        if (row.at("variant") == name)
          records.push_back({row.at("user_id").get<std::string>(), row.at("rank").get<std::size_t>(),
                             row.at("verdict").get<int>() == 1});
      std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.user_id, a.rank) < std::tie(b.user_id, b.rank);
      });
      ojson entry;
      entry["variant"] = name;
      entry["users"] = users.size();
      entry["candidates"] = n_candidates;
      entry["users_with_fewer_than_M"] = short_lists;
      entry["similar_at_1"] = similar_json(similar_at_m(records, users, 1));
      entry["similar_at_M"] = similar_json(similar_at_m(records, users, config.m));
      gen["variants"].push_back(std::move(entry));
    }
    report["generation"] = std::move(gen);

    if (config.human_labels) {
      const auto labels = load_human_labels(*config.human_labels);
      std::vector<char> judge_v, human_v;
      std::set<std::string> seen;
      for (const auto& row : judgments) {
        const std::string id = row.at("variant").get<std::string>() + ":" +
                               row.at("user_id").get<std::string>() + ":" +
                               std::to_string(row.at("rank").get<std::size_t>());
        const auto it = labels.find(id);
        if (it == labels.end()) continue;
        seen.insert(id);
        judge_v.push_back(row.at("verdict").get<int>() == 1);
        human_v.push_back(it->second);
      }
      for (const auto& [id, _] : labels)
        if (!seen.count(id)) throw ParseError("human label for unknown pair " + id);
      const std::size_t n = judge_v.size();
      auto jb = std::make_unique<bool[]>(n), hb = std::make_unique<bool[]>(n);
      for (std::size_t i = 0; i < n; ++i) {
        jb[i] = judge_v[i];
        hb[i] = human_v[i];
      }
      report["agreement"] = to_json(agreement_stats({jb.get(), n}, {hb.get(), n}));
    }
  }

  const auto probe_path = artifact_path(config, artifact::kProbe);
  report["probe"] = fs::exists(probe_path) ? ojson::parse(read_file(probe_path)) : ojson();

  if (report["classification"].is_null() && report["generation"].is_null())
    throw PrerequisiteError("report needs " + cls_path.string() + " or " + judg_path.string());
  return report;
}

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string report_markdown(const RunConfig& config, const ojson& report) {
  std::string md = "# Run " + config.run_id + "\n\n";
  if (!report["classification"].is_null()) {
    md += "## Classification (" + report["classification"]["split"].get<std::string>() + " split)\n\n";
    md += read_file(artifact_path(config, artifact::kClassifyReportMd));
    md += "\n";
  }
  if (!report["generation"].is_null()) {
    const std::string m = std::to_string(config.m);
    md += "## Generation\n\n| Variant | Users | Candidates | Similar@1 | Similar@" + m + " |\n";
    md += "|---|---|---|---|---|\n";
    for (const auto& v : report["generation"]["variants"]) {
      auto cell = [](const ojson& s) {
        return fmt4(s["value"].get<double>()) + " (" + std::to_string(s["hits"].get<std::size_t>()) +
               "/" + std::to_string(s["users"].get<std::size_t>()) + ")";
      };
      md += "| " + v["variant"].get<std::string>() + " | " + std::to_string(v["users"].get<std::size_t>()) +
            " | " + std::to_string(v["candidates"].get<std::size_t>()) + " | " + cell(v["similar_at_1"]) +
            " | " + cell(v["similar_at_M"]) + " |\n";
    }
    md += "\n";
  }
  if (!report["agreement"].is_null()) {
    const auto& a = report["agreement"];
    md += "## Judge agreement\n\n";
    md += "Pairs: " + std::to_string(a["n_pairs"].get<std::size_t>()) +
          ", kappa " + fmt4(a["cohen_kappa"].get<double>()) + ", precision " +
          fmt4(a["precision"].get<double>()) + ", recall " + fmt4(a["recall"].get<double>()) + "\n\n";
  }
  if (!report["probe"].is_null()) {
    md += "## Position probe\n\n| Model | Best epoch | Val accuracy | Test accuracy |\n|---|---|---|---|\n";
    for (const auto& r : report["probe"]["models"])
      md += "| " + r["model"].get<std::string>() + " | " + std::to_string(r["best_epoch"].get<std::size_t>()) +
            " | " + fmt4(r["val_accuracy"].get<double>()) + " | " + fmt4(r["test_accuracy"].get<double>()) +
            " |\n";
    md += "\n";
  }
  return md;
}

}  // namespace

void run_report(const RunConfig& config) {
  const auto report = build_report(config);
  write_file_atomic(artifact_path(config, artifact::kReport), dump_artifact(report));
  write_file_atomic(artifact_path(config, artifact::kReportMd), report_markdown(config, report));
}

void run_stage(const RunConfig& config, Stage stage) {
  fs::create_directories(config.run_dir());
  switch (stage) {
    case Stage::synth: return run_synth(config);
    case Stage::train: return run_train(config);
    case Stage::classify_eval: return run_classify_eval(config);
    case Stage::generate: return run_generate(config);
    case Stage::judge: return run_judge(config);
    case Stage::report: return run_report(config);
  }
}

}  // namespace intent
