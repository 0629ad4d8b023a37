#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fsseg/corpus.hpp"

namespace fsseg {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// F1 = 2PR/(P+R), defined as 0 when P + R = 0.
double f1_score(double precision, double recall);

struct MetricsReport {
  // label part
  std::array<Prf, kNumTags> per_tag{};
  Prf macro;  // unweighted mean over the two tags
  Prf micro;  // from pooled counts; P = R = token accuracy
  std::array<std::size_t, kNumTags> true_positives{};
  std::array<std::size_t, kNumTags> predicted_count{};
  std::array<std::size_t, kNumTags> gold_count{};
  std::size_t tokens = 0;

  // chunk part
  Prf chunk;
  std::size_t gold_chunks = 0;
  std::size_t predicted_chunks = 0;
  std::size_t correct_chunks = 0;
};

// Per-tag and averaged precision/recall/F1 over token labels. gold and pred
// must have matching shapes (DataError otherwise).
MetricsReport label_metrics(const std::vector<std::vector<Tag>>& gold,
                            const std::vector<std::vector<Tag>>& pred);

// Exact-span segment matching: a predicted segment counts iff the identical
// (start, end) span exists in gold for the same sequence.
MetricsReport chunk_metrics(const std::vector<std::vector<Tag>>& gold,
                            const std::vector<std::vector<Tag>>& pred);

// Both parts in one report.
MetricsReport evaluate_tags(const std::vector<std::vector<Tag>>& gold,
                            const std::vector<std::vector<Tag>>& pred);

// Fleiss' kappa over an items x categories matrix of rater counts. Every
// item must be rated by the same number (>= 2) of raters. Returns 1.0 for
// the degenerate case where all raters put all items in one category
// (chance agreement is 1 and the statistic is undefined).
double fleiss_kappa(const std::vector<std::vector<std::size_t>>& ratings);

// Aligned table in the B-fs / I-fs / Average_macro / Average_micro / Chunk
// row order, percentages with 2 decimals.
std::string format_report(const MetricsReport& report);

// Machine-readable "key=value" lines at full precision.
std::string report_key_values(const MetricsReport& report);

}  // namespace fsseg
