#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>
#include <l0bnb/problem_model.hpp>
#include <l0bnb/ridge.hpp>

namespace l0bnb {

class io_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class Correlation {
    constant,        ///< Sigma_ij = rho for i != j
    block_exp_decay  ///< k_true equal blocks, Sigma_ij = rho^|i-j| inside a block
};

struct SynthSpec
{
    index_t n = 100;
    index_t p = 100;
    index_t k_true = 10;
    Correlation correlation = Correlation::constant;
    double rho = 0.0;
    double snr = 5.0; // +infinity gives noiseless data
    std::uint64_t seed = 0;

    void validate() const
    {
        if (n < 1 || p < 1) throw config_error("synthetic data needs n, p >= 1");
        if (k_true < 0 || k_true > p) throw config_error("k_true must lie in [0, p]");
        if (!(rho >= 0 && rho < 1)) throw config_error("rho must lie in [0, 1)");
        if (!(snr > 0)) throw config_error("snr must be positive");
        if (correlation == Correlation::block_exp_decay && k_true < 1) {
            throw config_error("block design needs k_true >= 1 blocks");
        }
    }
};

struct SyntheticData
{
    Dataset raw;
    SparseCoefs true_beta; // original units
    double sigma2 = 0;
};

/// Equi-spaced support floor(j p / k), j = 0..k-1.
inline IndexSet equispaced_support(index_t p, index_t k)
{
    IndexSet s;
    for (index_t j = 0; j < k; ++j) s.push_back(j * p / k);
    return s;
}

/**
 * Draws X with rows iid MVN(0, Sigma), a planted beta with k_true ones, and
 * y = X beta + N(0, sigma2) noise where sigma2 = Var(X beta) / snr (empirical
 * variance of the noiseless signal). Deterministic in spec.seed.
 */
inline SyntheticData generate(const SynthSpec& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const index_t n = spec.n, p = spec.p;
    mat_t x(n, p);

    if (spec.correlation == Correlation::constant) {
        // rank-one shortcut: sqrt(rho) g 1^T + sqrt(1 - rho) G
        const double a = std::sqrt(spec.rho), b = std::sqrt(1 - spec.rho);
        for (index_t i = 0; i < n; ++i) {
            const double g = normal(rng);
            for (index_t j = 0; j < p; ++j) x(i, j) = a * g + b * normal(rng);
        }
    } else {
        // AR(1) inside each block gives Sigma_ij = rho^|i-j|
        const index_t k = spec.k_true;
        const double innov = std::sqrt(1 - spec.rho * spec.rho);
        for (index_t i = 0; i < n; ++i) {
            for (index_t blk = 0; blk < k; ++blk) {
                const index_t lo = blk * p / k, hi = (blk + 1) * p / k;
                double prev = 0;
                for (index_t j = lo; j < hi; ++j) {
                    const double e = normal(rng);
                    prev = j == lo ? e : spec.rho * prev + innov * e;
                    x(i, j) = prev;
                }
            }
        }
    }

    SyntheticData out;
    vec_t signal = vec_t::Zero(n);
    for (index_t j : equispaced_support(p, spec.k_true)) {
        out.true_beta[j] = 1.0;
        signal += x.col(j);
    }
    const double mean = signal.mean();
    const double var = (signal.array() - mean).square().mean();
    out.sigma2 = std::isinf(spec.snr) ? 0.0 : var / spec.snr;
    vec_t y = signal;
    if (out.sigma2 > 0) {
        const double sd = std::sqrt(out.sigma2);
        for (index_t i = 0; i < n; ++i) y[i] += sd * normal(rng);
    }
    out.raw = Dataset(std::move(x), std::move(y));
    return out;
}

/// Mean-centres (optionally) and scales y and every column of X to unit l2 norm.
inline Dataset normalize(const Dataset& raw, bool center = true)
{
    raw.validate();
    Dataset d;
    d.x = raw.x;
    d.y = raw.y;
    d.centered = center;
    d.column_means = center ? vec_t(d.x.colwise().mean().transpose()) : vec_t(vec_t::Zero(d.p()));
    d.y_mean = center ? d.y.mean() : 0.0;
    if (center) {
        d.x.rowwise() -= d.column_means.transpose();
        d.y.array() -= d.y_mean;
    }
    d.column_norms = d.x.colwise().norm().transpose();
    for (index_t j = 0; j < d.p(); ++j) {
        if (!(d.column_norms[j] > 1e-12 * std::sqrt(static_cast<double>(d.n())))) {
            throw config_error("column " + std::to_string(j) + " has zero variance");
        }
        d.x.col(j) /= d.column_norms[j];
    }
    d.y_norm = d.y.norm();
    if (!(d.y_norm > 0)) throw config_error("response has zero variance");
    d.y /= d.y_norm;
    return d;
}

/// ||X^T y||_inf^2 / (2 + 4 lambda2): smallest lambda0 keeping beta = 0 a coordinate-wise minimum.
inline double lambda0_max(const Dataset& data, double lambda2)
{
    const double g = (data.x.transpose() * data.y).cwiseAbs().maxCoeff();
    return g * g / (2 + 4 * lambda2);
}

/// Planted coefficients mapped onto the normalized scale.
inline SparseCoefs normalized_truth(const Dataset& data, const SparseCoefs& true_beta)
{
    SparseCoefs out;
    for (const auto& [i, v] : true_beta) set_coef(out, i, v * data.column_norms[i] / data.y_norm);
    return out;
}

struct RidgeEstimate
{
    double lambda2_star = 0;
    double m_star = 0;
    double estimation_error = 0;
};

/// log-spaced grid of `count` points on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int count)
{
    std::vector<double> g(count);
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        g[i] = std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)));
    }
    return g;
}

/**
 * Picks lambda2 on a 50-point log grid over [1e-4, 1e4] minimizing the l2
 * error of ridge restricted to the true support, and reports
 * M* = ||beta(lambda2*)||_inf. `true_beta` is in original units.
 */
inline RidgeEstimate estimate_ridge_params(const Dataset& data, const SparseCoefs& true_beta)
{
    const SparseCoefs truth = normalized_truth(data, true_beta);
    const IndexSet support = support_of(truth);
    RidgeEstimate best;
    best.estimation_error = infinity;
    if (support.empty()) {
        best.lambda2_star = 1e-4;
        best.estimation_error = 0;
        return best;
    }
    vec_t t(support.size());
    for (std::size_t j = 0; j < support.size(); ++j) t[j] = truth.at(support[j]);
    for (double l2 : log_grid(1e-4, 1e4, 50)) {
        const vec_t b = ridge_on_support(data, support, l2);
        const double err = (b - t).norm();
        if (err < best.estimation_error) {
            best = {l2, b.cwiseAbs().maxCoeff(), err};
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// File formats
//
// CSV: optional header row; the response is the column named by
// `response_column`, or the last column.
//
// Binary: "L0BB", version byte (1), uint64 rows, uint64 cols (little endian),
// then rows*cols float64 values in column-major order. Datasets store the
// response as the last column.
// ---------------------------------------------------------------------------

inline constexpr char binary_magic[4] = {'L', '0', 'B', 'B'};
inline constexpr std::uint8_t binary_version = 1;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r\"");
        const auto b = cell.find_last_not_of(" \t\r\"");
        out.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::optional<double> parse_double(const std::string& s)
{
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline bool is_little_endian()
{
    const std::uint16_t one = 1;
    unsigned char b;
    std::memcpy(&b, &one, 1);
    return b == 1;
}

template <class T>
inline void write_le(std::ostream& os, T v)
{
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if (!is_little_endian()) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
inline T read_le(std::istream& is)
{
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw io_error("truncated binary matrix");
    if (!is_little_endian()) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline Dataset split_response(const mat_t& m, index_t response)
{
    if (m.cols() < 2) throw io_error("dataset file needs at least one feature and a response column");
    mat_t x(m.rows(), m.cols() - 1);
    index_t k = 0;
    for (index_t j = 0; j < m.cols(); ++j) {
        if (j != response) x.col(k++) = m.col(j);
    }
    return Dataset(std::move(x), m.col(response));
}

} // namespace detail

inline void write_binary_matrix(const std::string& path, const mat_t& m)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path + " for writing");
    os.write(binary_magic, 4);
    detail::write_le<std::uint8_t>(os, binary_version);
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    for (index_t j = 0; j < m.cols(); ++j) {
        for (index_t i = 0; i < m.rows(); ++i) detail::write_le<double>(os, m(i, j));
    }
    if (!os) throw io_error("write failed for " + path);
}

inline mat_t read_binary_matrix(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, binary_magic, 4) != 0) {
        throw io_error(path + " is not an L0BB matrix file");
    }
    const auto version = detail::read_le<std::uint8_t>(is);
    if (version != binary_version) throw io_error("unsupported L0BB version " + std::to_string(version));
    const auto rows = detail::read_le<std::uint64_t>(is);
    const auto cols = detail::read_le<std::uint64_t>(is);
    mat_t m(static_cast<index_t>(rows), static_cast<index_t>(cols));
    for (index_t j = 0; j < m.cols(); ++j) {
        for (index_t i = 0; i < m.rows(); ++i) m(i, j) = detail::read_le<double>(is);
    }
    return m;
}

inline void write_binary_dataset(const std::string& path, const Dataset& data)
{
    mat_t m(data.n(), data.p() + 1);
    m.leftCols(data.p()) = data.x;
    m.col(data.p()) = data.y;
    write_binary_matrix(path, m);
}

inline Dataset read_binary_dataset(const std::string& path)
{
    const mat_t m = read_binary_matrix(path);
    return detail::split_response(m, m.cols() - 1);
}

inline Dataset read_csv_dataset(const std::string& path, const std::string& response_column = "")
{
    std::ifstream is(path);
    if (!is) throw io_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> header;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = detail::split_csv_line(line);
        std::vector<double> vals;
        bool numeric = true;
        for (const auto& c : cells) {
            auto v = detail::parse_double(c);
            if (!v) {
                numeric = false;
                break;
            }
            vals.push_back(*v);
        }
        if (!numeric) {
            if (rows.empty() && header.empty()) {
                header = std::move(cells);
                continue;
            }
            throw io_error(path + ":" + std::to_string(lineno) + ": non-numeric value");
        }
        if (!rows.empty() && vals.size() != rows.front().size()) {
            throw io_error(path + ":" + std::to_string(lineno) + ": ragged row");
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw io_error(path + " has no data rows");
    const index_t cols = static_cast<index_t>(rows.front().size());
    mat_t m(static_cast<index_t>(rows.size()), cols);
    for (index_t i = 0; i < m.rows(); ++i) {
        for (index_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    }
    index_t response = cols - 1;
    if (!response_column.empty()) {
        auto it = std::find(header.begin(), header.end(), response_column);
        if (it == header.end()) throw io_error("response column '" + response_column + "' not found in " + path);
        response = static_cast<index_t>(it - header.begin());
    }
    return detail::split_response(m, response);
}

inline void write_csv_dataset(const std::string& path, const Dataset& data)
{
    std::ofstream os(path);
    if (!os) throw io_error("cannot open " + path + " for writing");
    for (index_t j = 0; j < data.p(); ++j) os << 'x' << j << ',';
    os << "y\n";
    os.precision(17);
    for (index_t i = 0; i < data.n(); ++i) {
        for (index_t j = 0; j < data.p(); ++j) os << data.x(i, j) << ',';
        os << data.y[i] << '\n';
    }
    if (!os) throw io_error("write failed for " + path);
}

/// Loads a dataset by sniffing the L0BB magic; anything else is parsed as CSV.
inline Dataset load_dataset(const std::string& path, const std::string& response_column = "")
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (is.gcount() == 4 && std::memcmp(magic, binary_magic, 4) == 0) return read_binary_dataset(path);
    return read_csv_dataset(path, response_column);
}

} // namespace l0bnb
