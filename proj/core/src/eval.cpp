#include "hetattn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hetattn {

namespace {

std::vector<std::size_t> descending_order(std::span<const ScoredExample> ex) {
  std::vector<std::size_t> order(ex.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ex[a].score > ex[b].score; });
  return order;
}

}  // namespace

double roc_auc(std::span<const ScoredExample> ex) {
  std::size_t n_pos = 0;
  for (const auto& e : ex) n_pos += e.label ? 1 : 0;
  const std::size_t n_neg = ex.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("undefined AUC");

  // Ascending ranks with ties averaged.
  std::vector<std::size_t> order(ex.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ex[a].score < ex[b].score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && ex[order[j]].score == ex[order[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (ex[order[k]].label) rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double pr_auc(std::span<const ScoredExample> ex) {
  std::size_t n_pos = 0;
  for (const auto& e : ex) n_pos += e.label ? 1 : 0;
  if (n_pos == 0) throw std::invalid_argument("undefined PR AUC: no positive examples");
  const auto order = descending_order(ex);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && ex[order[j]].score == ex[order[i]].score) {
      group_pos += ex[order[j]].label ? 1 : 0;
      ++j;
    }
    tp += group_pos;
    seen += j - i;
    if (group_pos > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += precision * static_cast<double>(group_pos) / static_cast<double>(n_pos);
    }
    i = j;
  }
  return ap;
}

double f1(std::span<const ScoredExample> ex, double threshold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& e : ex) {
    const bool predicted = e.score >= threshold;
    if (predicted && e.label) ++tp;
    else if (predicted) ++fp;
    else if (e.label) ++fn;
  }
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * p * r / (p + r);
}

double tune_threshold(std::span<const ScoredExample> ex) {
  std::vector<double> candidates;
  for (const auto& e : ex) candidates.push_back(e.score);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best = 0.5, best_f1 = -1.0;
  for (double c : candidates) {
    const double v = f1(ex, c);
    if (v > best_f1) {
      best_f1 = v;
      best = c;
    }
  }
  return best;
}

bool eligible_for_selection(const EncodedComment& c, AttentionEvalMode mode) {
  if (c.sentence_instance || !c.abusive || c.sentence_spans.size() < 2) return false;
  const bool any_abusive =
      std::find(c.sentence_abusive.begin(), c.sentence_abusive.end(), true) != c.sentence_abusive.end();
  const bool any_benign =
      std::find(c.sentence_abusive.begin(), c.sentence_abusive.end(), false) != c.sentence_abusive.end();
  if (!any_abusive) return false;
  return mode == AttentionEvalMode::all_multi_sentence || any_benign;
}

std::size_t select_sentence(std::span<const double> attention, const EncodedComment& c) {
  if (c.sentence_spans.empty()) throw std::invalid_argument("select_sentence: no sentences");
  std::size_t best = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < c.sentence_spans.size(); ++s) {
    const auto [begin, end] = c.sentence_spans[s];
    if (end > attention.size()) throw std::invalid_argument("select_sentence: attention too short");
    double sum = 0.0;
    for (std::size_t t = begin; t < end; ++t) sum += attention[t];
    const double mean = sum / static_cast<double>(end - begin);
    if (mean > best_mean) {
      best_mean = mean;
      best = s;
    }
  }
  return best;
}

double attention_selection_accuracy(const Model& model, const std::vector<EncodedComment>& comments,
                                    AttentionEvalMode mode) {
  std::size_t eligible = 0, correct = 0;
  for (const auto& c : comments) {
    if (!eligible_for_selection(c, mode)) continue;
    ++eligible;
    const ForwardTrace trace = model.forward(c);
    if (c.sentence_abusive[select_sentence(trace.attention, c)]) ++correct;
  }
  if (eligible == 0) throw std::invalid_argument("no comments eligible for attention evaluation");
  return static_cast<double>(correct) / static_cast<double>(eligible);
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided: df must be > 0");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
  const auto n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  TTestResult r;
  r.df = n - 1.0;
  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
    r.t = 0.0;
    r.p = 1.0;
    return r;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

std::vector<double> shade_levels(std::span<const double> w) {
  std::vector<double> out(w.size(), 0.5);
  if (w.empty()) return out;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  if (*hi == *lo) return out;
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = (w[i] - *lo) / (*hi - *lo);
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

void check_lengths(const std::vector<std::string>& tokens, std::span<const double> weights) {
  if (tokens.size() != weights.size()) {
    throw std::invalid_argument("render_attention: token and weight counts differ");
  }
}

}  // namespace

std::string render_attention_svg(const std::vector<std::string>& tokens,
                                 std::span<const double> weights) {
  check_lengths(tokens, weights);
  const auto levels = shade_levels(weights);
  constexpr double kCharWidth = 8.4, kPad = 6.0, kHeight = 24.0, kGap = 4.0, kMaxWidth = 720.0;
  std::ostringstream body;
  double x = kGap, y = kGap;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double w = static_cast<double>(tokens[i].size()) * kCharWidth + 2 * kPad;
    if (x + w > kMaxWidth && x > kGap) {
      x = kGap;
      y += kHeight + kGap;
    }
    const int grey = static_cast<int>(std::lround(levels[i] * 255.0));
    const int ink = levels[i] < 0.5 ? 255 : 0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"rgb(%d,%d,%d)\"/>\n",
                  x, y, w, kHeight, grey, grey, grey);
    body << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" fill=\"rgb(%d,%d,%d)\" data-weight=\"%.6g\">", x + kPad,
                  y + 17.0, ink, ink, ink, weights[i]);
    body << buf << xml_escape(tokens[i]) << "</text>\n";
    x += w + kGap;
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kMaxWidth + kGap << "\" height=\""
      << y + kHeight + kGap << "\" font-family=\"monospace\" font-size=\"14\">\n"
      << body.str() << "</svg>\n";
  return svg.str();
}

std::string render_attention_ansi(const std::vector<std::string>& tokens,
                                  std::span<const double> weights) {
  check_lengths(tokens, weights);
  const auto levels = shade_levels(weights);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    // 232..255 is the 24-step grey ramp.
    const int bg = 232 + static_cast<int>(std::lround(levels[i] * 23.0));
    const int fg = levels[i] < 0.5 ? 255 : 232;
    if (i) out += ' ';
    out += "\x1b[48;5;" + std::to_string(bg) + ";38;5;" + std::to_string(fg) + "m" + tokens[i] +
           "\x1b[0m";
  }
  out += '\n';
  return out;
}

double SystemResult::mean(const std::string& metric) const {
  auto it = metrics.find(metric);
  if (it == metrics.end() || it->second.empty()) return std::nan("");
  return std::accumulate(it->second.begin(), it->second.end(), 0.0) /
         static_cast<double>(it->second.size());
}

const SystemResult& EvalReport::system(const std::string& name) const {
  for (const auto& s : systems) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no system named " + name);
}

const Comparison& EvalReport::compare(const std::string& a, const std::string& b,
                                      const std::string& metric) {
  const auto& va = system(a).metrics.at(metric);
  const auto& vb = system(b).metrics.at(metric);
  comparisons.push_back(Comparison{a, b, metric, paired_t_test(va, vb)});
  return comparisons.back();
}

namespace {

std::vector<std::string> metric_names(const EvalReport& r) {
  std::vector<std::string> names;
  for (const auto& s : r.systems) {
    for (const auto& [m, v] : s.metrics) {
      if (std::find(names.begin(), names.end(), m) == names.end()) names.push_back(m);
    }
  }
  return names;
}

std::string cell(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string format_table(const EvalReport& r) {
  const auto metrics = metric_names(r);
  std::size_t name_w = 6;
  for (const auto& s : r.systems) name_w = std::max(name_w, s.name.size());
  std::size_t col_w = 8;
  for (const auto& m : metrics) col_w = std::max(col_w, m.size());

  std::ostringstream out;
  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  auto lpad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  if (!r.title.empty()) out << r.title << "\n";
  out << pad("system", name_w);
  for (const auto& m : metrics) out << "  " << lpad(m, col_w);
  out << "\n" << std::string(name_w + metrics.size() * (col_w + 2), '-') << "\n";
  for (const auto& s : r.systems) {
    out << pad(s.name, name_w);
    for (const auto& m : metrics) out << "  " << lpad(cell(s.mean(m)), col_w);
    out << "\n";
  }
  if (r.seeds.size() > 1) {
    out << "\nper split (seeds";
    for (auto seed : r.seeds) out << ' ' << seed;
    out << ")\n";
    for (const auto& s : r.systems) {
      for (const auto& [m, values] : s.metrics) {
        out << pad(s.name, name_w) << "  " << pad(m, col_w);
        for (double v : values) out << "  " << cell(v);
        out << "\n";
      }
    }
  }
  if (!r.comparisons.empty()) {
    out << "\npaired t-tests\n";
    for (const auto& c : r.comparisons) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "t=%.3f df=%.0f p=%.4g", c.test.t, c.test.df, c.test.p);
      out << c.system_a << " vs " << c.system_b << " on " << c.metric << ": " << buf << "\n";
    }
  }
  return out.str();
}

std::string to_json(const EvalReport& r) {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  ordered_json j;
  j["title"] = r.title;
  j["seeds"] = r.seeds;
  ordered_json systems = ordered_json::array();
  for (const auto& s : r.systems) {
    ordered_json sj;
    sj["name"] = s.name;
    ordered_json per = ordered_json::object(), means = ordered_json::object();
    for (const auto& [m, values] : s.metrics) {
      ordered_json arr = ordered_json::array();
      for (double v : values) arr.push_back(num(v));
      per[m] = arr;
      means[m] = num(s.mean(m));
    }
    sj["mean"] = means;
    sj["splits"] = per;
    systems.push_back(sj);
  }
  j["systems"] = systems;
  ordered_json comps = ordered_json::array();
  for (const auto& c : r.comparisons) {
    comps.push_back({{"a", c.system_a}, {"b", c.system_b}, {"metric", c.metric},
                     {"t", num(c.test.t)}, {"df", c.test.df}, {"p", num(c.test.p)}});
  }
  j["comparisons"] = comps;
  return j.dump(2);
}

}  // namespace hetattn
