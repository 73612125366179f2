// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdlib>
#include <string_view>

namespace intent::testing {

namespace {
constexpr std::array<std::string_view, 16> kSyllables = {
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "pe", "do", "sa", "fu", "gri", "bel", "tor", "yx"};
}

std::filesystem::path fixtures_dir() { return INTENT_FIXTURES_DIR; }

std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("intent_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string random_word(Rng& rng) {
  std::string w;
  const std::size_t n = 1 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < n; ++i) w += kSyllables[uniform_index(rng, kSyllables.size())];
  if (uniform_index(rng, 8) == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::string random_text(Rng& rng, std::size_t max_words) {
  std::string s;
  const std::size_t n = uniform_index(rng, max_words + 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += uniform_index(rng, 10) == 0 ? " ; " : " ";
    s += random_word(rng);
  }
  return s;
}

Page random_page(Rng& rng, std::size_t max_attrs, std::size_t max_words) {
  std::vector<Attribute> attrs;
  attrs.push_back({"page type", random_word(rng)});
  const std::size_t extra = uniform_index(rng, max_attrs);
  for (std::size_t i = 0; i < extra; ++i) {
    std::string key = random_word(rng);
    if (uniform_index(rng, 2)) key += " " + random_word(rng);
    attrs.push_back({key, random_text(rng, max_words)});
  }
  return Page(std::move(attrs));
}

Session random_session(Rng& rng, std::size_t min_pages, std::size_t max_pages,
                       std::size_t max_words) {
  Session s;
  s.user_id = "u" + std::to_string(rng() % 1000000);
  const std::size_t n = min_pages + uniform_index(rng, max_pages - min_pages + 1);
  for (std::size_t i = 0; i < n; ++i) s.pages.push_back(random_page(rng, 4, max_words));
  return s;
}

Corpus random_corpus(Rng& rng, std::size_t n, std::size_t min_pages, std::size_t max_pages) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSession ls;
    ls.session = random_session(rng, min_pages, max_pages);
    ls.intent = "need help with " + random_word(rng);
    ls.label = class_at(uniform_index(rng, kNumClasses));
    const std::size_t s = uniform_index(rng, 4);
    if (s < 3) ls.split = static_cast<Split>(s);
    c.items.push_back(std::move(ls));
  }
  return c;
}

Session fixture_session() {
  Session s;
  s.user_id = "u000042";
  s.pages.emplace_back(std::vector<Attribute>{{"page type", "search"}, {"search query", "cordless drill"}});
  s.pages.emplace_back(std::vector<Attribute>{{"page type", "product"},
                                              {"product name", "Cordless Drill 20V"},
                                              {"availability", "in-stock at nearby store"}});
  return s;
}

EncodedInput random_input(Rng& rng, const ModelConfig& config, std::size_t length) {
  EncodedInput in;
  std::int32_t page = 0;
  for (std::size_t i = 0; i < length; ++i) {
    if (i == 0) {
      in.token_ids.push_back(kClsId);
      in.token_types.push_back(kTypeCls);
      in.page_positions.push_back(0);
    } else {
      in.token_ids.push_back(static_cast<TokenId>(uniform_index(rng, config.vocab_size)));
      in.token_types.push_back(1 + static_cast<std::int32_t>(uniform_index(rng, 2)));
      if (i > 1 && uniform_index(rng, 4) == 0 &&
          static_cast<std::size_t>(page + 1) < config.max_pages)
        ++page;
      in.page_positions.push_back(page);
    }
    in.token_positions.push_back(static_cast<std::int32_t>(i));
  }
  return in;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 200;
  c.d_model = 16;
  c.layers = 2;
  c.heads = 4;
  c.window = 8;
  c.max_tokens = 64;
  c.max_pages = 16;
  c.dropout = 0.0;
  c.precision = Precision::f64;
  c.seed = 7;
  return c;
}

template <typename T>
void perturb(ModelParams<T>& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& v : params.values) v += static_cast<T>(scale * standard_normal(rng));
}

template void perturb(ModelParams<float>&, std::uint64_t, double);
template void perturb(ModelParams<double>&, std::uint64_t, double);

int run_intentctl(const std::vector<std::string>& args, const std::filesystem::path& log) {
  std::string cmd = "'" INTENTCTL_PATH "'";
  for (const auto& a : args) {
    std::string quoted = "'";
    for (char c : a) quoted += c == '\'' ? std::string("'\\''") : std::string(1, c);
    cmd += " " + quoted + "'";
  }
  cmd += " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace intent::testing
