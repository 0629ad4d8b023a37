#include "fsseg/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fsseg/errors.hpp"

namespace fsseg {

namespace {

void check_shapes(const std::vector<std::vector<Tag>>& gold,
                  const std::vector<std::vector<Tag>>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("evaluation: gold has " + std::to_string(gold.size()) +
                    " sequences, pred has " + std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw DataError("evaluation: length mismatch at sequence " + std::to_string(i));
    }
    if (gold[i].empty()) throw DataError("evaluation: empty sequence " + std::to_string(i));
  }
}

Prf make_prf(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Prf out;
  out.precision = predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  out.recall = gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

}  // namespace

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

MetricsReport label_metrics(const std::vector<std::vector<Tag>>& gold,
                            const std::vector<std::vector<Tag>>& pred) {
  check_shapes(gold, pred);
  MetricsReport report;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < gold[i].size(); ++j) {
      const int g = static_cast<int>(gold[i][j]);
      const int p = static_cast<int>(pred[i][j]);
      ++report.gold_count[g];
      ++report.predicted_count[p];
      if (g == p) ++report.true_positives[g];
      ++report.tokens;
    }
  }
  for (int t = 0; t < kNumTags; ++t) {
    report.per_tag[t] =
        make_prf(report.true_positives[t], report.predicted_count[t], report.gold_count[t]);
  }
  report.macro.precision = (report.per_tag[0].precision + report.per_tag[1].precision) / 2.0;
  report.macro.recall = (report.per_tag[0].recall + report.per_tag[1].recall) / 2.0;
  report.macro.f1 = f1_score(report.macro.precision, report.macro.recall);
  const std::size_t tp = report.true_positives[0] + report.true_positives[1];
  report.micro = make_prf(tp, report.tokens, report.tokens);
  return report;
}

MetricsReport chunk_metrics(const std::vector<std::vector<Tag>>& gold,
                            const std::vector<std::vector<Tag>>& pred) {
  check_shapes(gold, pred);
  MetricsReport report;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::vector<Segment> gold_segments = segments_from_tags(gold[i]);
    const std::vector<Segment> pred_segments = segments_from_tags(pred[i]);
    report.gold_chunks += gold_segments.size();
    report.predicted_chunks += pred_segments.size();
    std::set<std::pair<std::size_t, std::size_t>> gold_spans;
    for (const Segment& s : gold_segments) gold_spans.insert({s.start, s.end});
    for (const Segment& s : pred_segments) {
      if (gold_spans.count({s.start, s.end})) ++report.correct_chunks;
    }
  }
  report.chunk = make_prf(report.correct_chunks, report.predicted_chunks, report.gold_chunks);
  return report;
}

MetricsReport evaluate_tags(const std::vector<std::vector<Tag>>& gold,
                            const std::vector<std::vector<Tag>>& pred) {
  MetricsReport report = label_metrics(gold, pred);
  const MetricsReport chunks = chunk_metrics(gold, pred);
  report.chunk = chunks.chunk;
  report.gold_chunks = chunks.gold_chunks;
  report.predicted_chunks = chunks.predicted_chunks;
  report.correct_chunks = chunks.correct_chunks;
  return report;
}

double fleiss_kappa(const std::vector<std::vector<std::size_t>>& ratings) {
  if (ratings.empty() || ratings[0].empty()) throw DataError("fleiss_kappa: empty rating matrix");
  const std::size_t categories = ratings[0].size();
  std::size_t raters = 0;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (ratings[i].size() != categories) {
      throw DataError("fleiss_kappa: ragged rating matrix at item " + std::to_string(i));
    }
    std::size_t row_sum = 0;
    for (std::size_t count : ratings[i]) row_sum += count;
    if (i == 0) raters = row_sum;
    if (row_sum != raters) {
      throw DataError("fleiss_kappa: item " + std::to_string(i) + " has " +
                      std::to_string(row_sum) + " ratings, expected " + std::to_string(raters));
    }
  }
  if (raters < 2) throw DataError("fleiss_kappa: at least 2 raters per item required");

  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(ratings.size());
  double p_bar = 0.0;
  std::vector<double> category_share(categories, 0.0);
  for (const auto& row : ratings) {
    double agree = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      const double r = static_cast<double>(row[j]);
      agree += r * (r - 1.0);
      category_share[j] += r;
    }
    p_bar += agree / (n * (n - 1.0));
  }
  p_bar /= items;
  double p_expected = 0.0;
  for (double share : category_share) {
    const double p = share / (items * n);
    p_expected += p * p;
  }
  if (p_expected >= 1.0) return 1.0;  // all ratings in one category
  return (p_bar - p_expected) / (1.0 - p_expected);
}

std::string format_report(const MetricsReport& report) {
  char buf[160];
  std::string out;
  auto row = [&](const char* label, const Prf& prf) {
    std::snprintf(buf, sizeof(buf), "%-14s %10.2f %10.2f %10.2f\n", label, 100.0 * prf.precision,
                  100.0 * prf.recall, 100.0 * prf.f1);
    out += buf;
  };
  std::snprintf(buf, sizeof(buf), "%-14s %10s %10s %10s\n", "Label", "Precision", "Recall",
                "F1-score");
  out += buf;
  row(tag_name(Tag::BFs).c_str(), report.per_tag[0]);
  row(tag_name(Tag::IFs).c_str(), report.per_tag[1]);
  row("Average_macro", report.macro);
  row("Average_micro", report.micro);
  row("Chunk", report.chunk);
  return out;
}

std::string report_key_values(const MetricsReport& report) {
  char buf[160];
  std::string out;
  auto emit = [&](const std::string& key, double value) {
    std::snprintf(buf, sizeof(buf), "%s=%.17g\n", key.c_str(), value);
    out += buf;
  };
  auto emit_count = [&](const std::string& key, std::size_t value) {
    out += key + "=" + std::to_string(value) + "\n";
  };
  const char* names[kNumTags] = {"B-fs", "I-fs"};
  for (int t = 0; t < kNumTags; ++t) {
    const std::string prefix = std::string("label.") + names[t];
    emit(prefix + ".precision", report.per_tag[t].precision);
    emit(prefix + ".recall", report.per_tag[t].recall);
    emit(prefix + ".f1", report.per_tag[t].f1);
  }
  emit("label.macro.precision", report.macro.precision);
  emit("label.macro.recall", report.macro.recall);
  emit("label.macro.f1", report.macro.f1);
  emit("label.micro.precision", report.micro.precision);
  emit("label.micro.recall", report.micro.recall);
  emit("label.micro.f1", report.micro.f1);
  emit("chunk.precision", report.chunk.precision);
  emit("chunk.recall", report.chunk.recall);
  emit("chunk.f1", report.chunk.f1);
  emit_count("chunk.gold", report.gold_chunks);
  emit_count("chunk.predicted", report.predicted_chunks);
  emit_count("chunk.correct", report.correct_chunks);
  emit_count("tokens", report.tokens);
  return out;
}

}  // namespace fsseg
