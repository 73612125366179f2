// SPDX-License-Identifier: Apache-2.0
#include "intent/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "intent/rng.hpp"

namespace intent {

namespace {

constexpr std::array<std::string_view, 5> kInsKeywords = {"installation", "install", "assembly",
                                                          "mounting", "installer"};
constexpr std::array<std::string_view, 5> kAvlKeywords = {"availability", "in-stock", "pickup",
                                                          "backorder", "inventory"};
constexpr std::array<std::string_view, 5> kPriKeywords = {"price-match", "coupon", "discount",
                                                          "competitor", "promo"};
constexpr std::array<std::string_view, 5> kWtyKeywords = {"warranty", "repair", "protection-plan",
                                                          "defect", "servicing"};
constexpr std::array<std::string_view, 5> kRetKeywords = {"return", "refund", "exchange",
                                                          "receipt", "restocking"};

constexpr std::array<ProbeRule, 3> kProbeRules = {{
    {"zephyr", IntentClass::INS, IntentClass::AVL},
    {"quartz", IntentClass::PRI, IntentClass::WTY},
    {"nimbus", IntentClass::RET, IntentClass::INS},
}};

constexpr std::array<std::string_view, 20> kItemAdjectives = {
    "cordless", "stainless", "outdoor",  "compact",  "smart",    "heavy-duty", "portable",
    "electric", "wooden",    "ceramic",  "lithium",  "vintage",  "modern",     "rustic",
    "deluxe",   "brushless", "front-load", "cast-iron", "solar", "adjustable"};
constexpr std::array<std::string_view, 10> kItemNouns = {
    "drill",  "refrigerator", "dishwasher", "ceiling fan", "water heater",
    "grill",  "lawn mower",   "vanity",     "faucet",      "patio set"};

constexpr std::array<std::string_view, 12> kBrands = {
    "northwind", "ridgecraft", "bluestone", "ironleaf", "hollowpine", "sunmark",
    "kestrel",   "granitex",   "oakridge",  "veltro",   "marlin",     "copperline"};

constexpr std::array<std::string_view, 16> kCategories = {
    "appliances", "tools",  "lighting", "flooring", "paint",   "plumbing", "electrical", "garden",
    "kitchen",    "bath",   "storage",  "decor",    "lumber",  "hardware", "heating",    "outdoor living"};

constexpr std::array<std::string_view, 96> kNoiseWords = {
    "best",     "deals",   "new",      "ideas",    "guide",    "how",      "to",       "choose",
    "the",      "right",   "for",      "your",     "home",     "small",    "large",    "white",
    "black",    "gray",    "blue",     "green",    "inch",     "foot",     "pack",     "set",
    "kit",      "project", "weekend",  "budget",   "easy",     "simple",   "style",    "trends",
    "spring",   "summer",  "fall",     "winter",   "room",     "garage",   "basement", "deck",
    "fence",    "window",  "door",     "wall",     "tile",     "wood",     "metal",    "glass",
    "energy",   "saving",  "quiet",    "fast",     "tips",     "plan",     "design",   "layout",
    "color",    "finish",  "size",     "chart",    "measure",  "estimate", "compare",  "features",
    "reviews",  "top",     "rated",    "popular",  "brands",   "shop",     "all",      "more",
    "cabinet",  "shelf",   "rug",      "lamp",     "bulb",     "switch",   "outlet",   "hose",
    "paver",    "mulch",   "soil",     "seed",     "planter",  "blind",    "curtain",  "mirror",
    "sink",     "tub",     "shower",   "toilet",   "counter",  "island",   "pantry",   "closet"};

constexpr std::array<std::string_view, 8> kSignalKeys = {
    "topic", "section", "link clicked", "help article", "banner", "faq", "service", "note"};

// {item} is replaced with the session's item name.
constexpr std::array<std::array<std::string_view, 3>, kNumClasses> kIntentTemplates = {{
    {"Hi, I just bought the {item}. Do you offer installation service for it?",
     "Can someone install the {item} at my home?",
     "How much does it cost to have the {item} installed?"},
    {"Is the {item} in stock at my local store?",
     "When will the {item} be available for delivery?",
     "Can I pick up the {item} today?"},
    {"I found the {item} cheaper elsewhere. Can you price match it?",
     "Will you match a competitor's price on the {item}?",
     "Is there a lower price available for the {item}?"},
    {"My {item} stopped working. Is it still under warranty?",
     "How do I get the {item} repaired?",
     "What does the warranty cover on the {item}?"},
    {"I want to return the {item} I bought last week.",
     "How do I get a refund for the {item}?",
     "Can I exchange the {item} for a different model?"},
}};

// Named types carry attributes; misc types are bare.
constexpr std::array<std::string_view, 9> kNamedTypes = {
    "product", "search",     "products list", "brand",      "catalog",
    "how to",  "buying guide", "inspiration",   "calculators"};
constexpr std::array<double, 10> kTypeWeights = {25, 15, 10, 5, 5, 3, 3, 3, 1, 30};  // last: misc

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& xs, Rng& rng) {
  return xs[uniform_index(rng, N)];
}

std::string pick_noise(const std::vector<std::string>& noise, Rng& rng, std::size_t lo,
                       std::size_t hi) {
  const std::size_t n = lo + uniform_index(rng, hi - lo + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += noise[uniform_index(rng, noise.size())];
  }
  return out;
}

struct SessionContext {
  const std::vector<std::string>& noise;
  const std::string& item;
};

Page noise_page(const SessionContext& ctx, Rng& rng) {
  const std::size_t t = sample_weighted(std::span<const double>(kTypeWeights), rng);
  if (t == kNamedTypes.size()) {
    return Page({{std::string(kPageTypeKey), page_types()[9 + uniform_index(rng, 57)]}});
  }
  const std::string type(kNamedTypes[t]);
  std::vector<Attribute> attrs{{std::string(kPageTypeKey), type}};
  const auto& catalog = item_catalog();
  if (type == "product") {
    const std::string& name =
        uniform01(rng) < 0.5 ? ctx.item : catalog[uniform_index(rng, catalog.size())];
    attrs.push_back({"product name", name});
    attrs.push_back({"brand", std::string(pick(kBrands, rng))});
  } else if (type == "search") {
    attrs.push_back({"search query", pick_noise(ctx.noise, rng, 1, 3)});
  } else if (type == "products list" || type == "catalog") {
    attrs.push_back({"category", std::string(pick(kCategories, rng))});
  } else if (type == "brand") {
    attrs.push_back({"brand name", std::string(pick(kBrands, rng))});
  } else {
    attrs.push_back({"title", pick_noise(ctx.noise, rng, 2, 4)});
  }
  return Page(std::move(attrs));
}

Page signal_page(IntentClass c, const SessionContext& ctx, Rng& rng) {
  const auto keywords = class_keywords(c);
  const std::string_view kw = keywords[uniform_index(rng, keywords.size())];
  static constexpr std::array<std::string_view, 4> kTypes = {"product", "how to", "search",
                                                             "buying guide"};
  const std::string type(pick(kTypes, rng));
  std::vector<Attribute> attrs{{std::string(kPageTypeKey), type}};
  if (type == "product") attrs.push_back({"product name", ctx.item});
  std::string value(kw);
  if (uniform01(rng) < 0.5) value = pick_noise(ctx.noise, rng, 1, 1) + " " + value;
  attrs.push_back({std::string(pick(kSignalKeys, rng)), std::move(value)});
  return Page(std::move(attrs));
}

std::string render_intent(IntentClass c, const std::string& item, Rng& rng) {
  const auto& templates = kIntentTemplates[index_of(c)];
  std::string out(templates[uniform_index(rng, templates.size())]);
  const auto pos = out.find("{item}");
  out.replace(pos, 6, item);
  return out;
}

std::size_t draw_page_count(const GenSpec& spec, Rng& rng) {
  const double ratio = spec.page_count_sd / spec.page_count_mean;
  const double sigma2 = std::log1p(ratio * ratio);
  const double mu = std::log(spec.page_count_mean) - 0.5 * sigma2;
  const double x = std::exp(mu + std::sqrt(sigma2) * standard_normal(rng));
  const std::size_t lo = std::max<std::size_t>(5, spec.signal_window);
  const auto n = static_cast<std::size_t>(std::llround(x));
  return std::clamp(n, lo, std::max(lo, spec.page_count_cap));
}

// Class labels with counts fixed by largest-remainder rounding, then shuffled.
std::vector<IntentClass> stratified_labels(const GenSpec& spec) {
  const std::size_t n = spec.n_sessions;
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> remainders{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = spec.class_proportions[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainders[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  std::array<std::size_t, kNumClasses> order;
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % kNumClasses]];

  std::vector<IntentClass> labels;
  labels.reserve(n);
  for (std::size_t c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), counts[c], class_at(c));
  Rng rng(mix_seed(spec.seed, 0xC1A55));
  fisher_yates(std::span<IntentClass>(labels), rng);
  return labels;
}

std::vector<std::string> resolve_noise(const GenSpec& spec) {
  if (!spec.noise_vocab.empty()) return spec.noise_vocab;
  return {kNoiseWords.begin(), kNoiseWords.end()};
}

std::string user_id_for(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u%06zu", i);
  return buf;
}

}  // namespace

std::array<double, kNumClasses> default_class_proportions() {
  std::array<double, kNumClasses> p = {0.373, 0.223, 0.217, 0.104, 0.082};
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return p;
}

void GenSpec::validate() const {
  double total = 0.0;
  for (double p : class_proportions) {
    if (p < 0) throw std::invalid_argument("class proportions must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("class proportions must sum to 1");
  if (signal_pages_min < 1 || signal_pages_max < signal_pages_min)
    throw std::invalid_argument("invalid signal page range");
  if (signal_window < signal_pages_max)
    throw std::invalid_argument("signal_window must be >= signal_pages");
  if (page_count_mean <= 0 || page_count_sd < 0) throw std::invalid_argument("invalid page counts");
}

const std::vector<std::string>& page_types() {
  static const std::vector<std::string> types = [] {
    std::vector<std::string> t(kNamedTypes.begin(), kNamedTypes.end());
    for (int i = 1; i <= 57; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "misc_%02d", i);
      t.emplace_back(buf);
    }
    return t;
  }();
  return types;
}

std::span<const std::string_view> class_keywords(IntentClass c) {
  switch (c) {
    case IntentClass::INS: return kInsKeywords;
    case IntentClass::AVL: return kAvlKeywords;
    case IntentClass::PRI: return kPriKeywords;
    case IntentClass::WTY: return kWtyKeywords;
    case IntentClass::RET: return kRetKeywords;
  }
  return {};
}

const std::vector<std::string>& item_catalog() {
  static const std::vector<std::string> items = [] {
    std::vector<std::string> out;
    for (auto adj : kItemAdjectives)
      for (auto noun : kItemNouns) out.push_back(std::string(adj) + " " + std::string(noun));
    return out;
  }();
  return items;
}

std::span<const ProbeRule> probe_rules() { return kProbeRules; }

Corpus generate_corpus(const GenSpec& spec) {
  spec.validate();
  const auto noise = resolve_noise(spec);
  const auto labels = stratified_labels(spec);
  const auto& catalog = item_catalog();

  Corpus corpus;
  corpus.items.resize(spec.n_sessions);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < spec.n_sessions; ++i) {
    Rng rng(mix_seed(spec.seed, i));
    const IntentClass c = labels[i];
    const std::string& item = catalog[uniform_index(rng, catalog.size())];
    const SessionContext ctx{noise, item};

    const std::size_t n_pages = draw_page_count(spec, rng);
    std::vector<Page> pages;
    pages.reserve(n_pages);
    for (std::size_t p = 0; p < n_pages; ++p) pages.push_back(noise_page(ctx, rng));

    const std::size_t window = std::min(spec.signal_window, n_pages);
    const std::size_t n_signal =
        std::min(window, spec.signal_pages_min +
                             uniform_index(rng, spec.signal_pages_max - spec.signal_pages_min + 1));
    std::vector<std::size_t> slots(window);
    std::iota(slots.begin(), slots.end(), n_pages - window);
    fisher_yates(std::span<std::size_t>(slots), rng);
    for (std::size_t k = 0; k < n_signal; ++k) pages[slots[k]] = signal_page(c, ctx, rng);

    auto& out = corpus.items[i];
    out.session.user_id = user_id_for(i);
    out.session.pages = std::move(pages);
    out.intent = render_intent(c, item, rng);
    out.label = c;
  }
  return corpus;
}

Corpus plant_position_probe(const GenSpec& spec) {
  spec.validate();
  const auto noise = resolve_noise(spec);
  const auto& catalog = item_catalog();

  Corpus corpus;
  corpus.items.resize(spec.n_sessions);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < spec.n_sessions; ++i) {
    Rng rng(mix_seed(spec.seed ^ 0x9B0BEULL, i));
    const std::string& item = catalog[uniform_index(rng, catalog.size())];
    const SessionContext ctx{noise, item};

    const std::size_t n_pages = draw_page_count(spec, rng);
    std::vector<Page> pages;
    pages.reserve(n_pages);
    for (std::size_t p = 0; p + 1 < n_pages; ++p) pages.push_back(noise_page(ctx, rng));

    const ProbeRule& rule = kProbeRules[uniform_index(rng, kProbeRules.size())];
    const bool as_key = uniform01(rng) < 0.5;
    std::vector<Attribute> attrs{{std::string(kPageTypeKey), std::string(pick(kNamedTypes, rng))}};
    auto filler = [&] { return noise[uniform_index(rng, noise.size())]; };
    const std::size_t before = uniform_index(rng, 3);
    const std::size_t after = uniform_index(rng, 3);
    for (std::size_t k = 0; k < before; ++k) attrs.push_back({filler(), filler()});
    if (as_key)
      attrs.push_back({std::string(rule.keyword), filler()});
    else
      attrs.push_back({filler(), std::string(rule.keyword)});
    for (std::size_t k = 0; k < after; ++k) attrs.push_back({filler(), filler()});
    pages.emplace_back(std::move(attrs));

    const IntentClass c = as_key ? rule.as_key : rule.as_value;
    auto& out = corpus.items[i];
    out.session.user_id = user_id_for(i);
    out.session.pages = std::move(pages);
    out.intent = render_intent(c, item, rng);
    out.label = c;
  }
  return corpus;
}

}  // namespace intent
