// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "intent/attention.hpp"
#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"
#include "intent/gateway.hpp"
#include "intent/metrics.hpp"
#include "intent/mock_server.hpp"
#include "intent/model.hpp"
#include "intent/pipeline.hpp"
#include "intent/prompts.hpp"
#include "intent/rng.hpp"
#include "intent/session.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace intent;
namespace fs = std::filesystem;
namespace fx = intent::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure; later checks still run so the detail is useful.
struct Check {
  Outcome out;
  void require(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<LabeledInput> random_batch(const ModelConfig& c, std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<LabeledInput> batch;
  for (std::size_t i = 0; i < n; ++i)
    batch.push_back({fx::random_input(rng, c, 6 + uniform_index(rng, 15)),
                     class_at(uniform_index(rng, kNumClasses))});
  return batch;
}

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig c = fx::tiny_config();
  auto params = init_params<double>(c);
  fx::perturb(params, 101, 0.05);
  const auto batch = random_batch(c, 102, 3);
  const auto lg = loss_and_grad<double>(params, std::span<const LabeledInput>(batch));
  const auto errs = oracle::gradient_check(params, batch, lg.grads, 1e-5, 1e-6);
  Check ck;
  double worst = 0;
  std::string worst_name;
  std::size_t checked = 0;
  for (const auto& e : errs) {
    checked += e.checked;
    if (e.max_rel_error > worst) {
      worst = e.max_rel_error;
      worst_name = e.name;
    }
    ck.require(e.max_rel_error <= 1e-4, e.name + " relative error " + fmt(e.max_rel_error));
  }
  const double dt = seconds_since(t0);
  ck.require(dt < 60, "took " + fmt(dt) + " s");
  if (ck.out.pass)
    ck.out.detail = std::to_string(errs.size()) + " tensors, " + std::to_string(checked) +
                    " entries, max rel error " + fmt(worst) + " (" + worst_name + ")";
  return ck.out;
}

Outcome ablation_identity() {
  const ModelConfig c = fx::tiny_config();
  auto plus = init_params<double>(c);
  fx::perturb(plus, 201, 0.05);
  for (auto& v : plus.tensor(plus.layout.type_emb)) v = 0;
  for (auto& v : plus.tensor(plus.layout.page_emb)) v = 0;
  auto base = plus;
  base.config.variant = Variant::Longformer;
  Rng rng(202);
  Check ck;
  for (int i = 0; i < 100; ++i) {
    const auto in = fx::random_input(rng, c, 2 + uniform_index(rng, c.max_tokens - 1));
    ck.require(forward(plus, in).logits == forward(base, in).logits,
               "logits differ on input " + std::to_string(i));
  }
  if (ck.out.pass) ck.out.detail = "100 inputs bit-identical";
  return ck.out;
}

std::vector<double> attention_out(bool banded, const std::vector<double>& q, const std::vector<double>& k,
                                  const std::vector<double>& v, const AttentionShape& s) {
  std::vector<double> ctx(s.q_rows * s.d_model);
  AttentionCache<double> cache;
  if (banded)
    banded_attention_forward<double>(q, k, v, s, ctx, cache);
  else
    masked_attention_forward<double>(q, k, v, s, ctx, cache);
  return ctx;
}

Outcome attention_equivalence() {
  Rng rng(301);
  Check ck;
  double worst_full = 0, worst_banded = 0;
  auto normal_vec = [&](std::size_t n) {
    std::vector<double> x(n);
    for (auto& e : x) e = standard_normal(rng);
    return x;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t heads = 1 + uniform_index(rng, 4);
    const std::size_t L = 1 + uniform_index(rng, 64);
    const std::size_t d = heads * (1 + uniform_index(rng, 8));
    AttentionShape s{L, L, d, heads, AttentionMode::sliding_global, 2 * L + 2 * uniform_index(rng, 4)};
    const auto q = normal_vec(L * d), k = normal_vec(L * d), v = normal_vec(L * d);
    auto full = s;
    full.mode = AttentionMode::full;
    const auto a = attention_out(false, q, k, v, s), b = attention_out(false, q, k, v, full);
    for (std::size_t i = 0; i < a.size(); ++i) worst_full = std::max(worst_full, std::abs(a[i] - b[i]));

    // banded against masked on a window that actually masks
    s.window = 2 * uniform_index(rng, L / 2 + 1);
    const auto m = attention_out(false, q, k, v, s), bd = attention_out(true, q, k, v, s);
    for (std::size_t i = 0; i < m.size(); ++i) worst_banded = std::max(worst_banded, std::abs(m[i] - bd[i]));
  }
  ck.require(worst_full <= 1e-6, "sliding vs full max diff " + fmt(worst_full));
  ck.require(worst_banded <= 1e-6, "banded vs masked max diff " + fmt(worst_banded));
  if (ck.out.pass)
    ck.out.detail = "100 draws, sliding(w>=2L) vs full " + fmt(worst_full) + ", banded vs masked " +
                    fmt(worst_banded);
  return ck.out;
}

Outcome learnability() {
  const auto dir = fx::scratch_dir("acceptance_learnability");
  auto cfg = nlohmann::json::parse(read_file(fx::fixtures_dir().parent_path() / "configs" / "desk.json"));
  cfg["output_dir"] = dir.string();
  cfg["train"]["target"] = 0.9;
  write_file_atomic(dir / "desk.json", cfg.dump(2));

  const auto t0 = std::chrono::steady_clock::now();
  const int status = fx::run_intentctl({"run", "--config", (dir / "desk.json").string(), "--stage", "synth,train"},
                                       dir / "log.txt");
  const double dt = seconds_since(t0);
  Check ck;
  ck.require(status == 0, "intentctl exited " + std::to_string(status) + "\n" + read_file(dir / "log.txt"));
  if (!ck.out.pass) return ck.out;

  const auto run = dir / cfg["run_id"].get<std::string>();
  const auto hist = nlohmann::json::parse(read_file(run / artifact::kHistory));
  std::size_t reached = 0;
  double wp = 0, wr = 0;
  for (const auto& e : hist.at("history")) {
    wp = e.at("val_weighted_precision").get<double>();
    wr = e.at("val_weighted_recall").get<double>();
    if (wp >= 0.9 && wr >= 0.9) {
      reached = e.at("epoch").get<std::size_t>();
      break;
    }
  }
  ck.require(reached >= 1 && reached <= 20,
             "val wP/wR never both reached 0.90 (last " + fmt(wp) + "/" + fmt(wr) + ")");
  ck.require(dt < 600, "took " + fmt(dt) + " s");

  const auto probe = nlohmann::json::parse(read_file(run / artifact::kProbe));
  double plus_acc = -1;
  std::string comparison;
  for (const auto& m : probe.at("models")) {
    const auto name = m.at("model").get<std::string>();
    const double acc = m.at("test_accuracy").get<double>();
    if (name == "Longformer+") plus_acc = acc;
    comparison += (comparison.empty() ? "" : ", ") + name + " " + fmt(acc, 3);
  }
  ck.require(plus_acc >= 0.9, "probe accuracy " + fmt(plus_acc));
  if (ck.out.pass)
    ck.out.detail = "val wP " + fmt(wp, 3) + " wR " + fmt(wr, 3) + " at epoch " + std::to_string(reached) +
                    " in " + fmt(dt, 3) + " s incl. probe; probe test accuracy: " + comparison;
  return ck.out;
}

struct Bools {
  std::unique_ptr<bool[]> data;
  std::size_t n;
  explicit Bools(const std::vector<bool>& v) : data(std::make_unique<bool[]>(v.size())), n(v.size()) {
    std::copy(v.begin(), v.end(), data.get());
  }
  std::span<const bool> span() const { return {data.get(), n}; }
};

Outcome metric_oracles() {
  Rng rng(501);
  Check ck;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 80);
    std::vector<std::optional<IntentClass>> preds;
    std::vector<IntentClass> golds;
    for (std::size_t i = 0; i < n; ++i) {
      golds.push_back(class_at(uniform_index(rng, kNumClasses)));
      preds.push_back(uniform_index(rng, 10) == 0 ? std::nullopt
                                                  : std::optional(class_at(uniform_index(rng, kNumClasses))));
    }
    const auto r = eval_report(preds, golds);
    const auto o = oracle::count_metrics(preds, golds);
    bool same = r.weighted_precision == o.weighted_precision && r.weighted_recall == o.weighted_recall;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      same = same && r.precision[c] == o.precision[c] && r.recall[c] == o.recall[c];
    ck.require(same, "eval_report differs from counting oracle at trial " + std::to_string(trial));
  }
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> users;
    std::vector<JudgmentRecord> recs;
    const std::size_t nu = 1 + uniform_index(rng, 20);
    for (std::size_t u = 0; u < nu; ++u) {
      users.push_back("u" + std::to_string(u));
      const std::size_t k = uniform_index(rng, 6);
      for (std::size_t r = 1; r <= k; ++r) recs.push_back({users.back(), r, uniform_index(rng, 4) == 0});
    }
    const std::size_t m = 1 + uniform_index(rng, 5);
    ck.require(similar_at_m(recs, users, m).value() == oracle::enumerate_similar_at_m(recs, users, m),
               "similar_at_m differs from enumeration at trial " + std::to_string(trial));
  }
  std::size_t agreement_cases = 0;
  for (int trial = 0; agreement_cases < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 50);
    std::vector<bool> judge(n), human(n);
    for (std::size_t i = 0; i < n; ++i) {
      judge[i] = uniform_index(rng, 2) == 1;
      human[i] = uniform_index(rng, 3) != 0 ? judge[i] : !judge[i];
    }
    AgreementStats s;
    try {
      s = agreement_stats(Bools(judge).span(), Bools(human).span());
    } catch (const MetricError&) {
      continue;  // chance agreement of 1 leaves kappa undefined
    }
    ++agreement_cases;
    const auto o = oracle::contingency(judge, human);
    ck.require(std::abs(s.cohen_kappa - o.kappa) <= 1e-12 &&
                   (!s.precision_defined || s.precision == o.precision) &&
                   (!s.recall_defined || s.recall == o.recall),
               "agreement_stats differs from contingency oracle at trial " + std::to_string(trial));
  }
  const auto ex = agreement_stats(Bools({true, true, false, false}).span(), Bools({true, false, false, false}).span());
  ck.require(std::abs(ex.cohen_kappa - 0.5) < 1e-12, "kappa example gave " + fmt(ex.cohen_kappa));
  if (ck.out.pass) ck.out.detail = "3 x 1000 random instances; kappa example " + fmt(ex.cohen_kappa);
  return ck.out;
}

Outcome prompt_goldens() {
  Check ck;
  const auto dir = fx::fixtures_dir() / "prompts";
  const Session s = fx::fixture_session();
  ck.require(build_classification_prompt(s) == read_file(dir / "classification.txt"), "classification prompt");
  const std::pair<GenVariant, std::optional<IntentClass>> cases[] = {
      {GenVariant::UsePredicted, IntentClass::AVL},
      {GenVariant::UseGroundTruth, IntentClass::PRI},
      {GenVariant::UseAll, std::nullopt},
      {GenVariant::UseNone, std::nullopt}};
  for (const auto& [v, c] : cases) {
    GenRequest r{s, v, c, 5, 42};
    ck.require(build_generation_prompt(r) == read_file(dir / (std::string(variant_name(v)) + ".txt")),
               std::string(variant_name(v)) + " prompt");
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    ck.require(shuffled_class_names(seed) == shuffled_class_names(seed), "shuffle not deterministic");
  if (ck.out.pass) ck.out.detail = "5 goldens byte-exact, 100 seeds deterministic";
  return ck.out;
}

Outcome mock_end_to_end() {
  const auto dir = fx::scratch_dir("acceptance_e2e");
  const auto t0 = std::chrono::steady_clock::now();
  const int status = fx::run_intentctl(
      {"e2e", "--config", (fx::fixtures_dir() / "e2e" / "config.json").string(), "--output-dir", dir.string()},
      dir / "log.txt");
  const double dt = seconds_since(t0);
  Check ck;
  ck.require(status == 0, "intentctl e2e exited " + std::to_string(status) + "\n" + read_file(dir / "log.txt"));
  ck.require(dt < 180, "took " + fmt(dt) + " s");
  if (ck.out.pass) ck.out.detail = "golden report reproduced in " + fmt(dt, 3) + " s";
  return ck.out;
}

Outcome gateway_robustness() {
  Check ck;
  const auto dir = fx::scratch_dir("acceptance_gateway");
  auto fifo = [](std::string reply, int status) { return FixtureEntry{std::nullopt, std::move(reply), status}; };

  MockServer::Options opts;
  opts.transcript_path = dir / "retry.jsonl";
  MockServer retry({fifo("busy", 503), fifo("busy", 503), fifo("ok", 200)}, opts);
  retry.start();
  GatewayConfig gc;
  gc.endpoint = retry.endpoint();
  gc.model = "m";
  gc.max_retries = 3;
  std::vector<double> slept;
  ChatClient client(gc, [&](double s) { slept.push_back(s); });
  const auto res = client.complete_detailed(client.make_request({{"user", "hello"}}));
  ck.require(res.content == "ok" && res.attempts == 3, "retry: got '" + res.content + "' after " +
                                                           std::to_string(res.attempts) + " attempts");
  ck.require(slept.size() == 2 && slept[0] > 0 && slept[0] <= slept[1], "backoff delays not non-decreasing");
  std::size_t lines = 0;
  {
    const auto text = read_file(dir / "retry.jsonl");
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto end = text.find('\n', pos);
      const auto body = nlohmann::json::parse(text.substr(pos, end - pos)).at("body").get<std::string>();
      ck.require(body.find("\"temperature\":0,") != std::string::npos, "temperature not serialized as 0");
      ++lines;
      pos = end + 1;
    }
  }
  ck.require(lines == 3, "transcript has " + std::to_string(lines) + " requests");

  std::vector<FixtureEntry> fixture;
  std::vector<ChatRequest> requests;
  for (int i = 0; i < 16; ++i) {
    requests.push_back(client.make_request({{"user", "q" + std::to_string(i)}}));
    fixture.push_back({request_fingerprint(requests.back().messages), "a" + std::to_string(i), 200});
  }
  MockServer::Options slow;
  slow.response_delay_ms = 30;
  MockServer pool(fixture, slow);
  pool.start();
  gc.endpoint = pool.endpoint();
  gc.max_in_flight = 3;
  ChatClient bounded(gc);
  const auto out = bounded.complete_all(requests);
  bool ordered = out.size() == requests.size();
  for (std::size_t i = 0; ordered && i < out.size(); ++i) ordered = out[i] == "a" + std::to_string(i);
  ck.require(ordered, "complete_all results out of order");
  ck.require(pool.max_concurrency() <= 3 && pool.max_concurrency() >= 2,
             "observed concurrency " + std::to_string(pool.max_concurrency()) + " with limit 3");
  if (ck.out.pass)
    ck.out.detail = "3 attempts with backoff " + fmt(slept[0], 3) + "s, " + fmt(slept[1], 3) +
                    "s; peak in-flight " + std::to_string(pool.max_concurrency()) + "/3; temperature 0 on wire";
  return ck.out;
}

Outcome data_invariants() {
  Check ck;
  Rng rng(901);
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const auto s = fx::random_session(rng, 1, 40, 8);
    const TruncationLimits lim{1 + uniform_index(rng, 45), 1 + uniform_index(rng, 6), 10 + uniform_index(rng, 300)};
    const std::size_t want = oracle::largest_fitting_suffix(s, lim.max_pages, lim.max_attr_tokens, lim.token_budget);
    if (want == 0) {
      bool threw = false;
      try {
        truncate_session(s, lim);
      } catch (const std::invalid_argument&) {
        threw = true;
      }
      ck.require(threw, "truncation accepted an oversized last page");
      continue;
    }
    const auto got = truncate_session(s, lim);
    ck.require(got.pages.size() == want && oracle::count_structured_tokens(got) <= lim.token_budget,
               "truncation suffix mismatch at trial " + std::to_string(t));
  }
  for (int t = 0; t < trials; ++t) {
    const auto c = fx::random_corpus(rng, 1 + uniform_index(rng, 30), 1, 9);
    const std::size_t min = 1 + uniform_index(rng, 8);
    std::size_t expect = 0;
    for (const auto& it : c.items) expect += it.session.pages.size() >= min;
    const auto f = filter_min_pages(c, min);
    bool ok = f.items.size() == expect;
    for (const auto& it : f.items) ok = ok && it.session.pages.size() >= min;
    ck.require(ok, "min-page filter mismatch at trial " + std::to_string(t));
  }
  {
    const auto big = fx::random_corpus(rng, 1000, 1, 12);
    std::size_t expect = 0;
    for (const auto& it : big.items) expect += it.session.pages.size() >= 5;
    ck.require(filter_min_pages(big).items.size() == expect, "default filter does not keep exactly the >=5-page sessions");
  }
  for (int t = 0; t < trials; ++t) {
    const auto c = fx::random_corpus(rng, 3 + uniform_index(rng, 60), 1, 3);
    const double tr = 0.5 + 0.4 * uniform01(rng);
    const double va = (1 - tr) * (0.1 + 0.8 * uniform01(rng));
    const SplitRatios r{tr, va, 1 - tr - va};
    const std::uint64_t seed = rng();
    const auto s = split_corpus(c, r, seed);
    const std::size_t n = c.items.size();
    std::size_t counts[3] = {0, 0, 0};
    bool ok = s.items.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) {
      ok = s.items[i].split.has_value() && s.items[i].session == c.items[i].session;
      if (ok) ++counts[static_cast<int>(*s.items[i].split)];
    }
    const auto ntr = static_cast<std::size_t>(std::floor(static_cast<double>(n) * tr));
    const auto nva = static_cast<std::size_t>(std::floor(static_cast<double>(n) * va));
    ok = ok && counts[0] == ntr && counts[1] == nva && counts[2] == n - ntr - nva && split_corpus(c, r, seed) == s;
    ck.require(ok, "split partition/floor rule broken at trial " + std::to_string(t));
  }
  for (int t = 0; t < trials; ++t) {
    const auto c = fx::random_corpus(rng, 1 + uniform_index(rng, 5), 1, 5);
    ck.require(corpus_from_jsonl(corpus_to_jsonl(c)) == c, "corpus JSONL round trip failed at trial " + std::to_string(t));
  }
  if (ck.out.pass) ck.out.detail = "4 properties x " + std::to_string(trials) + " random cases";
  return ck.out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"ablation identity", ablation_identity},
      {"attention equivalence", attention_equivalence},
      {"planted-signal learnability", learnability},
      {"metric oracles", metric_oracles},
      {"prompt byte-exactness", prompt_goldens},
      {"mock end-to-end", mock_end_to_end},
      {"gateway robustness", gateway_robustness},
      {"data-layer invariants", data_invariants},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << o.detail << "; " << fmt(seconds_since(t0), 3) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
