#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <iosfwd>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vfvol {

/// Daily close/volume series as read from `date,close,volume` CSV files.
struct RawDailySeries {
    std::vector<std::string> dates;  // ISO-8601, strictly increasing
    std::vector<double> close;
    std::vector<double> volume;

    [[nodiscard]] std::size_t size() const noexcept { return close.size(); }
};

/**
 * @brief Low-frequency response aligned with the lagged high-frequency panel.
 *
 * Row t of `x_lag` holds the m high-frequency values of the period preceding
 * observation t, so y[t] and v[t] can be modelled against x_lag.row(t) without
 * look-ahead.
 */
struct VaryingFrequencyDataset {
    std::vector<double> y;   // low-frequency log returns
    std::vector<double> v;   // low-frequency log volume changes
    Eigen::MatrixXd x_lag;   // n x m
    std::size_t m = 5;
    /// Number of forward-filled points in the period each observation refers to
    /// (only non-zero for calendar-week grouping).
    std::vector<int> fill_counts;
    /// Date of the last trading day in each observation's period, when known.
    std::vector<std::string> period_end;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
};

struct SplitSpec {
    std::size_t train_len = 0;
    std::size_t horizon = 4;
};

enum class PeriodMode {
    TradingDayBlocks,  // consecutive blocks of m rows from the first date
    CalendarWeeks,     // ISO weeks; short weeks forward-filled to m points
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || s.empty())
        throw std::invalid_argument("line " + std::to_string(line_no) + ": cannot parse number '" +
                                    std::string(s) + "'");
    return value;
}

inline std::chrono::year_month_day parse_iso_date(std::string_view s) {
    auto bad = [&] { return std::invalid_argument("invalid ISO-8601 date '" + std::string(s) + "'"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
    auto num = [&](std::size_t off, std::size_t len) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(s.data() + off, s.data() + off + len, v);
        if (ec != std::errc{} || ptr != s.data() + off + len) throw bad();
        return v;
    };
    const std::chrono::year_month_day d{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
    if (!d.ok()) throw bad();
    return d;
}

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

/// Checks the RawDailySeries invariants; throws std::invalid_argument naming the offending row.
inline void validate(const RawDailySeries& daily, std::size_t m) {
    const std::size_t n = daily.close.size();
    if (daily.volume.size() != n)
        throw std::invalid_argument("close and volume lengths differ");
    if (!daily.dates.empty() && daily.dates.size() != n)
        throw std::invalid_argument("dates and close lengths differ");
    if (m == 0) throw std::invalid_argument("period length m must be positive");
    if (n < 2 * m)
        throw std::invalid_argument("need at least " + std::to_string(2 * m) + " daily rows, got " +
                                    std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(daily.close[i] > 0.0) || !std::isfinite(daily.close[i]))
            throw std::invalid_argument("nonpositive or non-finite price at index " +
                                        std::to_string(i));
        if (!(daily.volume[i] >= 0.0) || !std::isfinite(daily.volume[i]))
            throw std::invalid_argument("negative or non-finite volume at index " +
                                        std::to_string(i));
    }
    for (std::size_t i = 0; i < daily.dates.size(); ++i) {
        const auto d = detail::parse_iso_date(daily.dates[i]);
        if (i > 0 && !(detail::parse_iso_date(daily.dates[i - 1]) < d))
            throw std::invalid_argument("dates not strictly increasing at index " +
                                        std::to_string(i));
    }
}

/**
 * @brief Aggregates a high-frequency panel into the aligned low-frequency dataset.
 *
 * Periods are consecutive blocks of @p m points; an incomplete trailing block
 * is dropped. y_t = ln(last_t / last_{t-1}), v_t = ln(V_t / V_{t-1}) with V_t the
 * block volume total, and x_lag row t holds block t-1. The first block only
 * feeds lags, so n = blocks - 1.
 */
inline VaryingFrequencyDataset build_dataset(std::span<const double> close,
                                             std::span<const double> volume, std::size_t m) {
    if (m == 0) throw std::invalid_argument("period length m must be positive");
    if (close.size() != volume.size())
        throw std::invalid_argument("close and volume lengths differ");
    for (std::size_t i = 0; i < close.size(); ++i) {
        if (!(close[i] > 0.0) || !std::isfinite(close[i]))
            throw std::invalid_argument("nonpositive or non-finite price at index " +
                                        std::to_string(i));
        if (!(volume[i] >= 0.0) || !std::isfinite(volume[i]))
            throw std::invalid_argument("negative or non-finite volume at index " +
                                        std::to_string(i));
    }
    const std::size_t periods = close.size() / m;
    if (periods < 3)
        throw std::invalid_argument("need at least 3 complete periods of " + std::to_string(m) +
                                    " points, got " + std::to_string(periods));

    std::vector<double> period_volume(periods, 0.0);
    for (std::size_t k = 0; k < periods; ++k) {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) total += volume[k * m + i];
        if (!(total > 0.0))
            throw std::invalid_argument("zero total volume in period " + std::to_string(k) +
                                        " (log volume change undefined)");
        period_volume[k] = total;
    }

    VaryingFrequencyDataset ds;
    ds.m = m;
    const std::size_t n = periods - 1;
    ds.y.resize(n);
    ds.v.resize(n);
    ds.x_lag.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    ds.fill_counts.assign(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t k = t + 1;
        ds.y[t] = std::log(close[k * m + m - 1] / close[(k - 1) * m + m - 1]);
        ds.v[t] = std::log(period_volume[k] / period_volume[k - 1]);
        for (std::size_t i = 0; i < m; ++i)
            ds.x_lag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
                close[(k - 1) * m + i];
    }
    return ds;
}

/// Builds the dataset from dated daily data, validating the series first.
inline VaryingFrequencyDataset build_dataset(const RawDailySeries& daily, std::size_t m = 5,
                                             PeriodMode mode = PeriodMode::TradingDayBlocks) {
    validate(daily, m);
    if (mode == PeriodMode::TradingDayBlocks) {
        auto ds = build_dataset(daily.close, daily.volume, m);
        if (!daily.dates.empty()) {
            for (std::size_t t = 0; t < ds.size(); ++t)
                ds.period_end.push_back(daily.dates[(t + 2) * m - 1]);
        }
        return ds;
    }

    if (daily.dates.empty())
        throw std::invalid_argument("calendar-week grouping requires dates");

    // Group rows by ISO week (Monday start).
    using namespace std::chrono;
    std::vector<std::vector<std::size_t>> weeks;
    long current_key = 0;
    for (std::size_t i = 0; i < daily.size(); ++i) {
        const sys_days d{detail::parse_iso_date(daily.dates[i])};
        const auto wd = weekday{d}.iso_encoding();  // 1 = Monday
        const long key = (d - days{wd - 1}).time_since_epoch().count();
        if (weeks.empty() || key != current_key) {
            weeks.emplace_back();
            current_key = key;
        }
        weeks.back().push_back(i);
    }
    for (std::size_t w = 0; w < weeks.size(); ++w) {
        if (weeks[w].size() > m)
            throw std::invalid_argument("calendar week starting at " + daily.dates[weeks[w][0]] +
                                        " has more than " + std::to_string(m) + " rows");
    }
    if (weeks.back().size() < m) weeks.pop_back();

    std::vector<double> close, volume;
    std::vector<int> fills;
    std::vector<std::string> ends;
    for (const auto& rows : weeks) {
        for (std::size_t r : rows) {
            close.push_back(daily.close[r]);
            volume.push_back(daily.volume[r]);
        }
        const int filled = static_cast<int>(m - rows.size());
        for (int f = 0; f < filled; ++f) {
            close.push_back(daily.close[rows.back()]);
            volume.push_back(0.0);
        }
        fills.push_back(filled);
        ends.push_back(daily.dates[rows.back()]);
    }
    auto ds = build_dataset(close, volume, m);
    for (std::size_t t = 0; t < ds.size(); ++t) {
        ds.fill_counts[t] = fills[t + 1];
        ds.period_end.push_back(ends[t + 1]);
    }
    return ds;
}

/// Contiguous sub-range [begin, begin + count) of a dataset.
inline VaryingFrequencyDataset slice(const VaryingFrequencyDataset& ds, std::size_t begin,
                                     std::size_t count) {
    if (begin + count > ds.size()) throw std::out_of_range("slice exceeds dataset length");
    VaryingFrequencyDataset out;
    out.m = ds.m;
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(begin + count);
    out.y.assign(ds.y.begin() + b, ds.y.begin() + e);
    out.v.assign(ds.v.begin() + b, ds.v.begin() + e);
    out.x_lag = ds.x_lag.middleRows(b, static_cast<Eigen::Index>(count));
    if (ds.fill_counts.size() == ds.size())
        out.fill_counts.assign(ds.fill_counts.begin() + b, ds.fill_counts.begin() + e);
    if (ds.period_end.size() == ds.size())
        out.period_end.assign(ds.period_end.begin() + b, ds.period_end.begin() + e);
    return out;
}

inline VaryingFrequencyDataset concat(const VaryingFrequencyDataset& a,
                                      const VaryingFrequencyDataset& b) {
    if (a.m != b.m) throw std::invalid_argument("cannot concatenate datasets with different m");
    VaryingFrequencyDataset out = a;
    out.y.insert(out.y.end(), b.y.begin(), b.y.end());
    out.v.insert(out.v.end(), b.v.begin(), b.v.end());
    out.x_lag.resize(a.x_lag.rows() + b.x_lag.rows(), static_cast<Eigen::Index>(a.m));
    out.x_lag << a.x_lag, b.x_lag;
    out.fill_counts.insert(out.fill_counts.end(), b.fill_counts.begin(), b.fill_counts.end());
    out.period_end.insert(out.period_end.end(), b.period_end.begin(), b.period_end.end());
    return out;
}

/// Prefix/suffix split; the test part carries its own x_lag rows for forecasting.
inline std::pair<VaryingFrequencyDataset, VaryingFrequencyDataset> split(
    const VaryingFrequencyDataset& ds, const SplitSpec& spec) {
    if (spec.horizon < 1) throw std::invalid_argument("split horizon must be at least 1");
    if (spec.train_len + spec.horizon > ds.size())
        throw std::invalid_argument("train_len + horizon (" +
                                    std::to_string(spec.train_len + spec.horizon) +
                                    ") exceeds dataset length " + std::to_string(ds.size()));
    return {slice(ds, 0, spec.train_len), slice(ds, spec.train_len, spec.horizon)};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline RawDailySeries read_daily_csv(std::istream& in) {
    RawDailySeries out;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw std::invalid_argument("empty daily CSV");
    ++line_no;
    const auto header = detail::split_csv_line(line);
    if (header.size() != 3 || header[0] != "date" || header[1] != "close" || header[2] != "volume")
        throw std::invalid_argument("daily CSV header must be 'date,close,volume'");
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 3)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 3 fields");
        detail::parse_iso_date(cells[0]);
        out.dates.emplace_back(cells[0]);
        out.close.push_back(detail::parse_double(cells[1], line_no));
        out.volume.push_back(detail::parse_double(cells[2], line_no));
    }
    return out;
}

inline RawDailySeries read_daily_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_daily_csv(in);
}

inline void write_daily_csv(std::ostream& out, const RawDailySeries& daily) {
    out << "date,close,volume\n";
    for (std::size_t i = 0; i < daily.size(); ++i)
        out << daily.dates[i] << ',' << detail::format_double(daily.close[i]) << ','
            << detail::format_double(daily.volume[i]) << '\n';
}

/// Writes `t,y,v,x1,...,xm`; t is 1-based. Values are printed with 17 significant digits.
inline void write_dataset_csv(std::ostream& out, const VaryingFrequencyDataset& ds) {
    out << "t,y,v";
    for (std::size_t i = 1; i <= ds.m; ++i) out << ",x" << i;
    out << '\n';
    for (std::size_t t = 0; t < ds.size(); ++t) {
        out << (t + 1) << ',' << detail::format_double(ds.y[t]) << ','
            << detail::format_double(ds.v[t]);
        for (Eigen::Index i = 0; i < ds.x_lag.cols(); ++i)
            out << ',' << detail::format_double(ds.x_lag(static_cast<Eigen::Index>(t), i));
        out << '\n';
    }
}

inline VaryingFrequencyDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty dataset CSV");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 4 || header[0] != "t" || header[1] != "y" || header[2] != "v")
        throw std::invalid_argument("dataset CSV header must be 't,y,v,x1,...,xm'");
    const std::size_t m = header.size() - 3;
    for (std::size_t i = 0; i < m; ++i)
        if (header[3 + i] != "x" + std::to_string(i + 1))
            throw std::invalid_argument("unexpected dataset column '" + std::string(header[3 + i]) +
                                        "'");
    VaryingFrequencyDataset ds;
    ds.m = m;
    std::vector<double> xs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != m + 3)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(m + 3) + " fields");
        ds.y.push_back(detail::parse_double(cells[1], line_no));
        ds.v.push_back(detail::parse_double(cells[2], line_no));
        for (std::size_t i = 0; i < m; ++i) {
            const double x = detail::parse_double(cells[3 + i], line_no);
            if (!std::isfinite(x))
                throw std::invalid_argument("line " + std::to_string(line_no) +
                                            ": non-finite covariate");
            xs.push_back(x);
        }
    }
    const auto n = static_cast<Eigen::Index>(ds.y.size());
    ds.x_lag = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        xs.data(), n, static_cast<Eigen::Index>(m));
    ds.fill_counts.assign(ds.y.size(), 0);
    return ds;
}

/**
 * @brief Loads either CSV flavour: a raw `date,close,volume` file (aggregated
 * with @p m) or an already aligned `t,y,v,x1..` file.
 */
inline VaryingFrequencyDataset load_dataset(const std::string& path, std::size_t m = 5,
                                            PeriodMode mode = PeriodMode::TradingDayBlocks) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string first;
    std::getline(in, first);
    in.clear();
    in.seekg(0);
    if (detail::trim(first).substr(0, 4) == "date") return build_dataset(read_daily_csv(in), m, mode);
    return read_dataset_csv(in);
}

}  // namespace vfvol
