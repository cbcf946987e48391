#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "docsim/error.hpp"
#include "docsim/strfmt.hpp"

namespace docsim {

// Composable aggregation primitives. Every variant is a commutative monoid
// under combine: the freshly constructed aggregator is the identity, and
// filling a stream then combining partials gives the same state as filling
// serially, independent of the split. What to accumulate is captured by
// extractor lambdas, so a whole analysis is one aggregator tree.
//
// Variants: Count, Sum, Average, Deviate (streaming mean/M2), Bin (fixed
// regular binning with underflow/overflow/nan counters and a sub-aggregator
// per bin), Label (named collection filled as a unit).
template <typename Datum>
class Aggregator {
 public:
  enum class Kind { Count, Sum, Average, Deviate, Bin, Label };
  using Extractor = std::function<double(const Datum&)>;

  Aggregator() = default;

  static Aggregator count() { return Aggregator(Kind::Count); }

  static Aggregator sum(Extractor f) {
    Aggregator a(Kind::Sum);
    a.extractor_ = std::move(f);
    return a;
  }

  static Aggregator average(Extractor f) {
    Aggregator a(Kind::Average);
    a.extractor_ = std::move(f);
    return a;
  }

  static Aggregator deviate(Extractor f) {
    Aggregator a(Kind::Deviate);
    a.extractor_ = std::move(f);
    return a;
  }

  static Aggregator bin(int num_bins, double low, double high, Extractor f,
                        const Aggregator& prototype = count()) {
    if (num_bins < 1) throw ParamError("Bin: num_bins must be >= 1");
    if (!(low < high)) throw ParamError("Bin: low must be < high");
    Aggregator a(Kind::Bin);
    a.extractor_ = std::move(f);
    a.low_ = low;
    a.high_ = high;
    a.children_.assign(static_cast<size_t>(num_bins), prototype);
    return a;
  }

  static Aggregator label(std::map<std::string, Aggregator> children) {
    Aggregator a(Kind::Label);
    a.labels_ = std::move(children);
    return a;
  }

  Kind kind() const { return kind_; }
  int64_t count_value() const { return count_; }
  double sum_value() const { return sum_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  // Population variance.
  double variance() const { return count_ > 0 ? m2_ / static_cast<double>(count_) : 0.0; }
  double bin_low() const { return low_; }
  double bin_high() const { return high_; }
  size_t num_bins() const { return children_.size(); }
  const Aggregator& bin_at(size_t i) const { return children_.at(i); }
  int64_t underflow() const { return underflow_; }
  int64_t overflow() const { return overflow_; }
  int64_t nan_count() const { return nan_; }
  const std::map<std::string, Aggregator>& labels() const { return labels_; }

  /// Advances the state by one observation.
  void fill(const Datum& d) {
    switch (kind_) {
      case Kind::Count:
        ++count_;
        return;
      case Kind::Sum:
        sum_ += extract(d);
        return;
      case Kind::Average: {
        const double x = extract(d);
        ++count_;
        mean_ += (x - mean_) / static_cast<double>(count_);
        return;
      }
      case Kind::Deviate: {
        const double x = extract(d);
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (x - mean_);
        return;
      }
      case Kind::Bin: {
        if (!extractor_)
          throw Error("fill: aggregator has no extractor (parsed from JSON?)");
        double x;
        try {
          x = extractor_(d);
        } catch (const std::exception&) {
          ++nan_;  // a failing extractor routes the datum to the nan counter
          return;
        }
        if (!std::isfinite(x)) {
          ++nan_;
        } else if (x < low_) {
          ++underflow_;
        } else if (x >= high_) {
          ++overflow_;
        } else {
          auto idx = static_cast<size_t>(
              std::floor(static_cast<double>(children_.size()) * (x - low_) /
                         (high_ - low_)));
          if (idx >= children_.size()) idx = children_.size() - 1;
          children_[idx].fill(d);
        }
        return;
      }
      case Kind::Label:
        for (auto& [name, child] : labels_) child.fill(d);
        return;
    }
  }

  /// Monoid merge. Both operands must have the same shape; a mismatch names
  /// the divergent path.
  static Aggregator combined(const Aggregator& a, const Aggregator& b) {
    Aggregator out = a;
    out.merge_from(b, "$");
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    switch (kind_) {
      case Kind::Count:
        j["type"] = "Count";
        j["data"] = count_;
        break;
      case Kind::Sum:
        j["type"] = "Sum";
        j["data"] = sum_;
        break;
      case Kind::Average:
        j["type"] = "Average";
        j["data"] = {{"count", count_}, {"mean", mean_}};
        break;
      case Kind::Deviate:
        j["type"] = "Deviate";
        j["data"] = {{"count", count_}, {"mean", mean_}, {"m2", m2_}};
        break;
      case Kind::Bin: {
        j["type"] = "Bin";
        nlohmann::ordered_json data;
        data["low"] = low_;
        data["high"] = high_;
        data["underflow"] = count_node(underflow_);
        data["overflow"] = count_node(overflow_);
        data["nan"] = count_node(nan_);
        auto values = nlohmann::ordered_json::array();
        for (const auto& c : children_) values.push_back(c.to_json());
        data["values"] = std::move(values);
        j["data"] = std::move(data);
        break;
      }
      case Kind::Label: {
        j["type"] = "Label";
        nlohmann::ordered_json data = nlohmann::ordered_json::object();
        for (const auto& [name, child] : labels_) data[name] = child.to_json();
        j["data"] = std::move(data);
        break;
      }
    }
    return j;
  }

  std::string to_json_string() const { return to_json().dump(); }

  /// Rebuilds an aggregator from its JSON form. Extractors cannot travel
  /// through JSON, so the result can be combined, inspected, and rendered,
  /// but filling it raises an error.
  static Aggregator from_json(const nlohmann::json& j,
                              const std::string& path = "$") {
    if (!j.is_object() || !j.contains("type") || !j.contains("data"))
      throw DataError("aggregator json at " + path +
                      ": expected object with 'type' and 'data'");
    const std::string type = j["type"].get<std::string>();
    const auto& data = j["data"];
    try {
      if (type == "Count") {
        Aggregator a(Kind::Count);
        a.count_ = data.get<int64_t>();
        return a;
      }
      if (type == "Sum") {
        Aggregator a(Kind::Sum);
        a.sum_ = data.get<double>();
        return a;
      }
      if (type == "Average") {
        Aggregator a(Kind::Average);
        a.count_ = data.at("count").get<int64_t>();
        a.mean_ = data.at("mean").get<double>();
        return a;
      }
      if (type == "Deviate") {
        Aggregator a(Kind::Deviate);
        a.count_ = data.at("count").get<int64_t>();
        a.mean_ = data.at("mean").get<double>();
        a.m2_ = data.at("m2").get<double>();
        return a;
      }
      if (type == "Bin") {
        Aggregator a(Kind::Bin);
        a.low_ = data.at("low").get<double>();
        a.high_ = data.at("high").get<double>();
        a.underflow_ = parse_count_node(data.at("underflow"), path + ".data.underflow");
        a.overflow_ = parse_count_node(data.at("overflow"), path + ".data.overflow");
        a.nan_ = parse_count_node(data.at("nan"), path + ".data.nan");
        const auto& values = data.at("values");
        if (!values.is_array() || values.empty())
          throw DataError("aggregator json at " + path +
                          ".data.values: expected non-empty array");
        for (size_t i = 0; i < values.size(); ++i)
          a.children_.push_back(from_json(
              values[i], path + ".data.values[" + std::to_string(i) + "]"));
        if (!(a.low_ < a.high_))
          throw DataError("aggregator json at " + path + ": low must be < high");
        return a;
      }
      if (type == "Label") {
        Aggregator a(Kind::Label);
        if (!data.is_object())
          throw DataError("aggregator json at " + path +
                          ".data: expected object of children");
        for (auto it = data.begin(); it != data.end(); ++it)
          a.labels_.emplace(it.key(),
                            from_json(it.value(), path + ".data." + it.key()));
        return a;
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("aggregator json at " + path + ": " + e.what());
    }
    throw DataError("aggregator json at " + path + ": unknown type '" + type +
                    "'");
  }

  static Aggregator from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("aggregator json at $: ") + e.what());
    }
    return from_json(j);
  }

  /// Structural and state equality; counts compare exactly, floating state
  /// within tol (tol 0 compares exactly).
  bool state_equal(const Aggregator& o, double tol = 0.0) const {
    if (kind_ != o.kind_) return false;
    auto close = [tol](double x, double y) {
      return tol == 0.0 ? x == y : std::abs(x - y) <= tol;
    };
    switch (kind_) {
      case Kind::Count:
        return count_ == o.count_;
      case Kind::Sum:
        return close(sum_, o.sum_);
      case Kind::Average:
        return count_ == o.count_ && close(mean_, o.mean_);
      case Kind::Deviate:
        return count_ == o.count_ && close(mean_, o.mean_) && close(m2_, o.m2_);
      case Kind::Bin: {
        if (children_.size() != o.children_.size() || low_ != o.low_ ||
            high_ != o.high_ || underflow_ != o.underflow_ ||
            overflow_ != o.overflow_ || nan_ != o.nan_)
          return false;
        for (size_t i = 0; i < children_.size(); ++i)
          if (!children_[i].state_equal(o.children_[i], tol)) return false;
        return true;
      }
      case Kind::Label: {
        if (labels_.size() != o.labels_.size()) return false;
        auto it = labels_.begin();
        auto jt = o.labels_.begin();
        for (; it != labels_.end(); ++it, ++jt) {
          if (it->first != jt->first || !it->second.state_equal(jt->second, tol))
            return false;
        }
        return true;
      }
    }
    return false;
  }

 private:
  explicit Aggregator(Kind k) : kind_(k) {}

  double extract(const Datum& d) const {
    if (!extractor_)
      throw Error("fill: aggregator has no extractor (parsed from JSON?)");
    return extractor_(d);
  }

  static nlohmann::ordered_json count_node(int64_t n) {
    nlohmann::ordered_json j;
    j["type"] = "Count";
    j["data"] = n;
    return j;
  }

  static int64_t parse_count_node(const nlohmann::json& j,
                                  const std::string& path) {
    if (!j.is_object() || j.value("type", "") != "Count")
      throw DataError("aggregator json at " + path + ": expected Count node");
    return j.at("data").get<int64_t>();
  }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Count: return "Count";
      case Kind::Sum: return "Sum";
      case Kind::Average: return "Average";
      case Kind::Deviate: return "Deviate";
      case Kind::Bin: return "Bin";
      case Kind::Label: return "Label";
    }
    return "?";
  }

  void merge_from(const Aggregator& o, const std::string& path) {
    if (kind_ != o.kind_)
      throw DataError(std::string("combine mismatch at ") + path + ": " +
                      kind_name(kind_) + " vs " + kind_name(o.kind_));
    switch (kind_) {
      case Kind::Count:
        count_ += o.count_;
        return;
      case Kind::Sum:
        sum_ += o.sum_;
        return;
      case Kind::Average: {
        // An empty side is the monoid identity; merging with it must not
        // touch a single bit of the other side's state.
        if (o.count_ == 0) return;
        if (count_ == 0) {
          count_ = o.count_;
          mean_ = o.mean_;
          return;
        }
        const int64_t n = count_ + o.count_;
        mean_ = (static_cast<double>(count_) * mean_ +
                 static_cast<double>(o.count_) * o.mean_) /
                static_cast<double>(n);
        count_ = n;
        return;
      }
      case Kind::Deviate: {
        if (o.count_ == 0) return;
        if (count_ == 0) {
          count_ = o.count_;
          mean_ = o.mean_;
          m2_ = o.m2_;
          return;
        }
        // Parallel merge of streaming moments.
        const int64_t n = count_ + o.count_;
        const double delta = o.mean_ - mean_;
        const double na = static_cast<double>(count_);
        const double nb = static_cast<double>(o.count_);
        m2_ = m2_ + o.m2_ + delta * delta * na * nb / static_cast<double>(n);
        mean_ = (na * mean_ + nb * o.mean_) / static_cast<double>(n);
        count_ = n;
        return;
      }
      case Kind::Bin: {
        if (children_.size() != o.children_.size())
          throw DataError("combine mismatch at " + path + ": Bin sizes " +
                          std::to_string(children_.size()) + " vs " +
                          std::to_string(o.children_.size()));
        if (low_ != o.low_ || high_ != o.high_)
          throw DataError("combine mismatch at " + path + ": Bin ranges differ");
        underflow_ += o.underflow_;
        overflow_ += o.overflow_;
        nan_ += o.nan_;
        for (size_t i = 0; i < children_.size(); ++i)
          children_[i].merge_from(o.children_[i],
                                  path + ".values[" + std::to_string(i) + "]");
        return;
      }
      case Kind::Label: {
        if (labels_.size() != o.labels_.size())
          throw DataError("combine mismatch at " + path +
                          ": Label child sets differ");
        auto it = labels_.begin();
        auto jt = o.labels_.begin();
        for (; it != labels_.end(); ++it, ++jt) {
          if (it->first != jt->first)
            throw DataError("combine mismatch at " + path + "." + it->first +
                            ": Label child sets differ");
          it->second.merge_from(jt->second, path + "." + it->first);
        }
        return;
      }
    }
  }

  Kind kind_ = Kind::Count;
  Extractor extractor_;
  int64_t count_ = 0;
  double sum_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double low_ = 0.0;
  double high_ = 0.0;
  int64_t underflow_ = 0;
  int64_t overflow_ = 0;
  int64_t nan_ = 0;
  std::vector<Aggregator> children_;
  std::map<std::string, Aggregator> labels_;
};

enum class RenderFormat { Csv, Svg, Text };

inline RenderFormat parse_render_format(const std::string& s) {
  if (s == "csv") return RenderFormat::Csv;
  if (s == "svg") return RenderFormat::Svg;
  if (s == "text") return RenderFormat::Text;
  throw ParamError("unknown render format: " + s);
}

namespace detail {

template <typename Datum>
void require_count_bins(const Aggregator<Datum>& bin) {
  using Kind = typename Aggregator<Datum>::Kind;
  if (bin.kind() != Kind::Bin)
    throw ParamError("render: aggregator is not a Bin (or Label of Bins)");
  for (size_t i = 0; i < bin.num_bins(); ++i)
    if (bin.bin_at(i).kind() != Kind::Count)
      throw ParamError("render: Bin values must be Count aggregators");
}

template <typename Datum>
std::string bin_csv(const Aggregator<Datum>& bin) {
  require_count_bins(bin);
  std::string out;
  const double width = (bin.bin_high() - bin.bin_low()) /
                       static_cast<double>(bin.num_bins());
  for (size_t i = 0; i < bin.num_bins(); ++i) {
    const double lo = bin.bin_low() + width * static_cast<double>(i);
    const double hi = i + 1 == bin.num_bins() ? bin.bin_high()
                                              : bin.bin_low() + width * static_cast<double>(i + 1);
    out += format_shortest(lo) + "," + format_shortest(hi) + "," +
           std::to_string(bin.bin_at(i).count_value()) + "\n";
  }
  out += "-inf," + format_shortest(bin.bin_low()) + "," +
         std::to_string(bin.underflow()) + "\n";
  out += format_shortest(bin.bin_high()) + ",inf," +
         std::to_string(bin.overflow()) + "\n";
  out += "nan,nan," + std::to_string(bin.nan_count()) + "\n";
  return out;
}

template <typename Datum>
std::string bin_text(const Aggregator<Datum>& bin, int bar_width = 50) {
  require_count_bins(bin);
  int64_t max_count = 1;
  for (size_t i = 0; i < bin.num_bins(); ++i)
    max_count = std::max(max_count, bin.bin_at(i).count_value());
  const double width = (bin.bin_high() - bin.bin_low()) /
                       static_cast<double>(bin.num_bins());
  std::string out;
  for (size_t i = 0; i < bin.num_bins(); ++i) {
    const double lo = bin.bin_low() + width * static_cast<double>(i);
    const int64_t c = bin.bin_at(i).count_value();
    const auto bars = static_cast<size_t>(
        (static_cast<double>(c) / static_cast<double>(max_count)) * bar_width);
    char head[48];
    std::snprintf(head, sizeof(head), "%10.2f |", lo);
    out += head;
    out.append(bars, '#');
    out += " " + std::to_string(c) + "\n";
  }
  out += "underflow " + std::to_string(bin.underflow()) + "  overflow " +
         std::to_string(bin.overflow()) + "  nan " +
         std::to_string(bin.nan_count()) + "\n";
  return out;
}

template <typename Datum>
std::string bin_svg_panel(const Aggregator<Datum>& bin, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          double y_offset) {
  require_count_bins(bin);
  const double w = 640, h = 400;
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  const double plot_w = w - ml - mr;
  const double plot_h = h - mt - mb;
  int64_t max_count = 1;
  for (size_t i = 0; i < bin.num_bins(); ++i)
    max_count = std::max(max_count, bin.bin_at(i).count_value());

  auto num = [](double v) { return format_shortest(v); };
  std::string s;
  s += "<g transform=\"translate(0," + num(y_offset) + ")\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(w) + "\" height=\"" + num(h) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(w / 2) + "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
  // axes
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + plot_h) + "\" x2=\"" +
       num(ml + plot_w) + "\" y2=\"" + num(mt + plot_h) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) +
       "\" y2=\"" + num(mt + plot_h) + "\" stroke=\"black\"/>\n";
  // bars
  const double bw = plot_w / static_cast<double>(bin.num_bins());
  for (size_t i = 0; i < bin.num_bins(); ++i) {
    const double frac = static_cast<double>(bin.bin_at(i).count_value()) /
                        static_cast<double>(max_count);
    const double bh = plot_h * frac;
    s += "<rect x=\"" + num(ml + bw * static_cast<double>(i)) + "\" y=\"" +
         num(mt + plot_h - bh) + "\" width=\"" + num(bw) + "\" height=\"" +
         num(bh) + "\" fill=\"#b22222\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
  }
  // x ticks: low, middle, high
  const double mid = bin.bin_low() + (bin.bin_high() - bin.bin_low()) / 2.0;
  const double xs[3] = {bin.bin_low(), mid, bin.bin_high()};
  const double px[3] = {ml, ml + plot_w / 2.0, ml + plot_w};
  for (int i = 0; i < 3; ++i) {
    s += "<text x=\"" + num(px[i]) + "\" y=\"" + num(mt + plot_h + 20) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">" + num(xs[i]) + "</text>\n";
  }
  // y ticks: 0 and max
  s += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(mt + plot_h + 4) +
       "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">0"
       "</text>\n";
  s += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(mt + 4) +
       "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" +
       std::to_string(max_count) + "</text>\n";
  // axis labels
  s += "<text x=\"" + num(ml + plot_w / 2.0) + "\" y=\"" + num(h - 10) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"14\">" + x_label + "</text>\n";
  s += "<text x=\"18\" y=\"" + num(mt + plot_h / 2.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
       "transform=\"rotate(-90 18 " + num(mt + plot_h / 2.0) + ")\">" +
       y_label + "</text>\n";
  s += "</g>\n";
  return s;
}

}  // namespace detail

/// Deterministic rendering of a Bin (or a Label of Bins, one panel each).
template <typename Datum>
std::string render(const Aggregator<Datum>& a, RenderFormat format,
                   const std::string& title = "",
                   const std::string& x_label = "value",
                   const std::string& y_label = "count") {
  using Kind = typename Aggregator<Datum>::Kind;

  std::vector<std::pair<std::string, const Aggregator<Datum>*>> panels;
  if (a.kind() == Kind::Bin) {
    panels.emplace_back(title, &a);
  } else if (a.kind() == Kind::Label) {
    for (const auto& [name, child] : a.labels()) {
      if (child.kind() != Kind::Bin)
        throw ParamError("render: Label children must be Bins");
      panels.emplace_back(name, &child);
    }
    if (panels.empty()) throw ParamError("render: empty Label");
  } else {
    throw ParamError("render: aggregator is not a Bin (or Label of Bins)");
  }

  switch (format) {
    case RenderFormat::Csv: {
      std::string out;
      for (const auto& [name, bin] : panels) {
        if (panels.size() > 1) out += "#panel " + name + "\n";
        out += detail::bin_csv(*bin);
      }
      return out;
    }
    case RenderFormat::Text: {
      std::string out;
      for (const auto& [name, bin] : panels) {
        if (!name.empty()) out += name + "\n";
        out += detail::bin_text(*bin);
      }
      return out;
    }
    case RenderFormat::Svg: {
      const double panel_h = 400;
      std::string out =
          "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"" +
          format_shortest(panel_h * static_cast<double>(panels.size())) +
          "\">\n";
      for (size_t i = 0; i < panels.size(); ++i)
        out += detail::bin_svg_panel(*panels[i].second, panels[i].first,
                                     x_label, y_label,
                                     panel_h * static_cast<double>(i));
      out += "</svg>\n";
      return out;
    }
  }
  throw ParamError("render: bad format");
}

}  // namespace docsim
