// SPDX-License-Identifier: Apache-2.0
#pragma once

// Random data builders shared by the property tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "intent/model.hpp"
#include "intent/rng.hpp"
#include "intent/session.hpp"
#include "intent/tokenizer.hpp"

namespace intent::testing {

std::filesystem::path fixtures_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

std::string random_word(Rng& rng);
// Value string with 0..max_words words; may contain " ; " separators.
std::string random_text(Rng& rng, std::size_t max_words);
Page random_page(Rng& rng, std::size_t max_attrs = 4, std::size_t max_words = 6);
Session random_session(Rng& rng, std::size_t min_pages, std::size_t max_pages,
                       std::size_t max_words = 6);
Corpus random_corpus(Rng& rng, std::size_t n, std::size_t min_pages, std::size_t max_pages);

// Two-page session used by the prompt goldens.
Session fixture_session();

// Valid encoded input of length L for a config (ids within range).
EncodedInput random_input(Rng& rng, const ModelConfig& config, std::size_t length);

// Tiny f64 config used by gradient and ablation checks.
ModelConfig tiny_config();

// Fills every parameter with N(0, scale) so LayerNorm gains and biases are
// exercised away from their initial values.
template <typename T>
void perturb(ModelParams<T>& params, std::uint64_t seed, double scale);

// Runs intentctl with the given arguments, sending stdout and stderr to
// `log`. Returns the process exit status.
int run_intentctl(const std::vector<std::string>& args, const std::filesystem::path& log);

}  // namespace intent::testing
