// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic labeled browsing corpora with a plantable class signal.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intent/session.hpp"

namespace intent {

// Class shares of the retailer dataset, normalized (the published shares sum
// to 0.999).
std::array<double, kNumClasses> default_class_proportions();

struct GenSpec {
  std::size_t n_sessions = 1000;
  std::array<double, kNumClasses> class_proportions = default_class_proportions();
  // Lognormal page counts with this mean and standard deviation, clamped to
  // [max(5, signal_window), page_count_cap].
  double page_count_mean = 68.0;
  double page_count_sd = 111.0;
  std::size_t page_count_cap = 400;
  std::size_t signal_pages_min = 1;
  std::size_t signal_pages_max = 3;
  std::size_t signal_window = 5;
  std::vector<std::string> noise_vocab;  // empty: built-in list
  std::uint64_t seed = 0;

  void validate() const;
};

// Every page type the generator can emit: the nine attribute-bearing types
// followed by misc_01..misc_57.
const std::vector<std::string>& page_types();

// Keywords planted on signal pages of class c; disjoint across classes.
std::span<const std::string_view> class_keywords(IntentClass c);

// Built-in item catalog shared by pages and intent templates.
const std::vector<std::string>& item_catalog();

Corpus generate_corpus(const GenSpec& spec);

// Position probe: the final page carries one probe keyword either as an
// attribute key or as an attribute value, and the label is a function of
// (keyword, role). Other pages are signal-free noise.
struct ProbeRule {
  std::string_view keyword;
  IntentClass as_value;
  IntentClass as_key;
};
std::span<const ProbeRule> probe_rules();

Corpus plant_position_probe(const GenSpec& spec);

}  // namespace intent
