#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <vector>

#include "hflvne/errors.hpp"
#include "hflvne/record.hpp"
#include "hflvne/text_io.hpp"
#include "hflvne/workload.hpp"

namespace hflvne {

/// Lifetime times the total requested cpu and bandwidth.
inline double vnr_revenue(const VirtualNetworkRequest& vnr) {
  double demand = 0.0;
  for (double c : vnr.node_demands) demand += c;
  for (const auto& l : vnr.links) demand += l.bw;
  return vnr.lifetime() * demand;
}

/// Like revenue, but each link's bandwidth is charged once per substrate hop.
inline double vnr_cost(const VirtualNetworkRequest& vnr, const EmbeddingRecord& record) {
  if (!record.accepted) throw RejectedRecord(vnr.vnr_id);
  double demand = 0.0;
  for (double c : vnr.node_demands) demand += c;
  for (std::size_t e = 0; e < vnr.links.size(); ++e)
    demand += vnr.links[e].bw * static_cast<double>(record.hops(e));
  return vnr.lifetime() * demand;
}

struct LedgerEvent {
  double t = 0.0;
  double revenue = 0.0;
  double cost = 0.0;
  bool accepted = false;
};

struct SeriesPoint {
  double t = 0.0;  // elapsed since the ledger origin
  double ltar = 0.0;
  double ltar2c = 0.0;
  double acc = 0.0;
};

/// Time-ordered acceptance events with running sums.
///
/// Query times are measured from `origin`: an event at absolute time t is
/// inside window T when t - origin <= T. Rejected requests contribute only to
/// the total count.
class MetricsLedger {
 public:
  explicit MetricsLedger(double origin = 0.0) : origin_(origin) {}

  double origin() const { return origin_; }

  void record(double t, double revenue, double cost, bool accepted) {
    if (!events_.empty() && t < events_.back().t) throw std::invalid_argument("ledger events must be time-ordered");
    if (!accepted) revenue = cost = 0.0;
    events_.push_back({t, revenue, cost, accepted});
    cum_.push_back({revenue + total_revenue(), cost + total_cost(), accepted_count() + (accepted ? 1u : 0u)});
  }

  const std::vector<LedgerEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }

  double total_revenue() const { return cum_.empty() ? 0.0 : cum_.back().revenue; }
  double total_cost() const { return cum_.empty() ? 0.0 : cum_.back().cost; }
  std::size_t accepted_count() const { return cum_.empty() ? 0 : cum_.back().accepted; }
  std::size_t total_count() const { return events_.size(); }

  /// Elapsed time of the last event, the default window for summaries.
  double span() const { return events_.empty() ? 0.0 : events_.back().t - origin_; }

  double ltar(double T) const {
    if (!(T > 0.0)) throw UndefinedMetric("ltar needs T > 0");
    return window(T).revenue / T;
  }

  double ltar2c(double T) const {
    auto w = window(T);
    if (!(w.cost > 0.0)) throw UndefinedMetric("ltar2c needs positive cumulative cost");
    return w.revenue / w.cost;
  }

  double acc(double T) const {
    auto n = count_until(T);
    if (n == 0) throw UndefinedMetric("acc needs at least one request");
    return static_cast<double>(window(T).accepted) / static_cast<double>(n);
  }

  double ltar() const { return ltar(span()); }
  double ltar2c() const { return ltar2c(span()); }
  double acc() const { return acc(span()); }

  /// Samples every `interval` time units up to the last event (plus the last
  /// event itself when it is not on the grid). Undefined values become NaN.
  std::vector<SeriesPoint> series(double interval) const {
    std::vector<SeriesPoint> out;
    if (events_.empty() || !(interval > 0.0)) return out;
    const double end = span();
    auto point = [&](double T) {
      SeriesPoint p;
      p.t = T;
      p.ltar = T > 0.0 ? window(T).revenue / T : nan();
      auto w = window(T);
      p.ltar2c = w.cost > 0.0 ? w.revenue / w.cost : nan();
      auto n = count_until(T);
      p.acc = n > 0 ? static_cast<double>(w.accepted) / static_cast<double>(n) : nan();
      return p;
    };
    std::size_t k = 1;
    for (; static_cast<double>(k) * interval <= end; ++k) out.push_back(point(static_cast<double>(k) * interval));
    if (out.empty() || out.back().t < end) out.push_back(point(end));
    return out;
  }

  /// Merges two ledgers that share an origin into one time-ordered ledger.
  static MetricsLedger merge(const MetricsLedger& a, const MetricsLedger& b) {
    if (a.origin_ != b.origin_) throw std::invalid_argument("cannot merge ledgers with different origins");
    std::vector<LedgerEvent> all(a.events_);
    all.insert(all.end(), b.events_.begin(), b.events_.end());
    std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.t < y.t; });
    MetricsLedger out(a.origin_);
    for (const auto& e : all) out.record(e.t, e.revenue, e.cost, e.accepted);
    return out;
  }

 private:
  struct Cumulative {
    double revenue = 0.0;
    double cost = 0.0;
    std::size_t accepted = 0;
  };

  static double nan() { return std::numeric_limits<double>::quiet_NaN(); }

  std::size_t count_until(double T) const {
    auto it = std::upper_bound(events_.begin(), events_.end(), origin_ + T,
                               [](double t, const LedgerEvent& e) { return t < e.t; });
    return static_cast<std::size_t>(it - events_.begin());
  }

  Cumulative window(double T) const {
    auto n = count_until(T);
    return n == 0 ? Cumulative{} : cum_[n - 1];
  }

  double origin_ = 0.0;
  std::vector<LedgerEvent> events_;
  std::vector<Cumulative> cum_;
};

inline void write_series_csv(std::ostream& out, const std::vector<SeriesPoint>& series) {
  out << "t,ltar,ltar2c,acc\n";
  for (const auto& p : series)
    out << text::fmt(p.t) << ',' << text::fmt(p.ltar) << ',' << text::fmt(p.ltar2c) << ',' << text::fmt(p.acc) << '\n';
}

/// Least-squares slope of y against x, ignoring NaN samples.
inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    ++n;
  }
  if (n < 2) return 0.0;
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (dn * sxy - sx * sy) / denom;
}

}  // namespace hflvne
