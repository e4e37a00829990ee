#include "ecgtf/eval.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "ecgtf/error.hpp"

namespace ecgtf::eval {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (const auto v : row) n += v;
  }
  return n;
}

std::size_t ConfusionMatrix::row_sum(int c) const {
  std::size_t n = 0;
  for (const auto v : counts.at(static_cast<std::size_t>(c))) n += v;
  return n;
}

std::size_t ConfusionMatrix::column_sum(int c) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row.at(static_cast<std::size_t>(c));
  return n;
}

ConfusionMatrix confusion(std::span<const Rhythm> predictions, std::span<const Rhythm> labels) {
  if (predictions.size() != labels.size()) {
    throw InvalidArgument("got " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = static_cast<int>(labels[i]);
    const int p = static_cast<int>(predictions[i]);
    if (t < 0 || t >= kClassCount || p < 0 || p >= kClassCount) {
      throw InvalidArgument("class index out of range at position " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> mean_of(const std::array<std::optional<double>, kClassCount>& v, int n) {
  double s = 0.0;
  for (int c = 0; c < n; ++c) {
    if (!v[static_cast<std::size_t>(c)]) return std::nullopt;
    s += *v[static_cast<std::size_t>(c)];
  }
  return s / n;
}

std::string fixed3(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

PrecisionRecall precision_recall(const ConfusionMatrix& cm) {
  PrecisionRecall pr;
  for (int c = 0; c < kClassCount; ++c) {
    const auto diag = cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    pr.precision[static_cast<std::size_t>(c)] = ratio(diag, cm.column_sum(c));
    pr.recall[static_cast<std::size_t>(c)] = ratio(diag, cm.row_sum(c));
  }
  return pr;
}

F1Scores challenge_f1(const ConfusionMatrix& cm) {
  F1Scores f;
  for (int c = 0; c < kClassCount; ++c) {
    const auto diag = cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    f.per_class[static_cast<std::size_t>(c)] = ratio(2 * diag, cm.row_sum(c) + cm.column_sum(c));
  }
  f.mean3 = mean_of(f.per_class, 3);
  f.mean4 = mean_of(f.per_class, 4);
  return f;
}

MetricsReport report(const ConfusionMatrix& cm) { return {cm, precision_recall(cm), challenge_f1(cm)}; }

std::string to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["classes"] = nlohmann::json::array();
  nlohmann::json rows = nlohmann::json::array();
  for (int c = 0; c < kClassCount; ++c) {
    const auto i = static_cast<std::size_t>(c);
    j["classes"].push_back(std::string(1, to_symbol(static_cast<Rhythm>(c))));
    rows.push_back(r.confusion.counts[i]);
    j["per_class"][std::string(to_name(static_cast<Rhythm>(c)))] = {
        {"precision", opt(r.pr.precision[i])}, {"recall", opt(r.pr.recall[i])}, {"f1", opt(r.f1.per_class[i])}};
  }
  j["confusion"] = rows;
  j["total"] = r.confusion.total();
  j["f1_mean3"] = opt(r.f1.mean3);
  j["f1_mean4"] = opt(r.f1.mean4);
  return j.dump(2) + "\n";
}

std::string format_confusion(const ConfusionMatrix& cm) {
  std::size_t width = 5;
  for (const auto& row : cm.counts) {
    for (const auto v : row) width = std::max(width, std::to_string(v).size() + 1);
  }
  std::ostringstream out;
  const auto cell = [&](const std::string& s) { out << std::string(width - s.size(), ' ') << s; };
  out << "true\\pred";
  for (int c = 0; c < kClassCount; ++c) cell(std::string(1, to_symbol(static_cast<Rhythm>(c))));
  out << '\n';
  for (int t = 0; t < kClassCount; ++t) {
    out << "        " << to_symbol(static_cast<Rhythm>(t));
    for (int p = 0; p < kClassCount; ++p) {
      cell(std::to_string(cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]));
    }
    out << '\n';
  }
  return out.str();
}

std::string format_metrics(const MetricsReport& r) {
  std::ostringstream out;
  out << "class    precision  recall     f1\n";
  for (int c = 0; c < kClassCount; ++c) {
    const auto i = static_cast<std::size_t>(c);
    char line[96];
    std::snprintf(line, sizeof line, "%-8s %-10s %-10s %s\n", std::string(to_name(static_cast<Rhythm>(c))).c_str(),
                  fixed3(r.pr.precision[i]).c_str(), fixed3(r.pr.recall[i]).c_str(),
                  fixed3(r.f1.per_class[i]).c_str());
    out << line;
  }
  out << "F1 (N, A, O mean) = " << fixed3(r.f1.mean3) << '\n';
  out << "F1 (four-class mean) = " << fixed3(r.f1.mean4) << '\n';
  return out.str();
}

}  // namespace ecgtf::eval
