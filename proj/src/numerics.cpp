#include "seqcap/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace seqcap {

uint64_t SeededRng::next_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double SeededRng::gaussian(double mean, double sigma) {
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
}

RealVector matvec(const Matrix& m, const RealVector& v) {
    if (m.cols != static_cast<int>(v.size()))
        throw std::invalid_argument("matvec: dimension mismatch");
    RealVector out(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        const double* row = m.data.data() + static_cast<size_t>(i) * m.cols;
        for (int j = 0; j < m.cols; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

RealVector matvec_transpose(const Matrix& m, const RealVector& v) {
    if (m.rows != static_cast<int>(v.size()))
        throw std::invalid_argument("matvec_transpose: dimension mismatch");
    RealVector out(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + static_cast<size_t>(i) * m.cols;
        for (int j = 0; j < m.cols; ++j) out[j] += row[j] * v[i];
    }
    return out;
}

void add_outer(Matrix& acc, const RealVector& u, const RealVector& v) {
    if (acc.rows != static_cast<int>(u.size()) || acc.cols != static_cast<int>(v.size()))
        throw std::invalid_argument("add_outer: dimension mismatch");
    for (int i = 0; i < acc.rows; ++i) {
        double* row = acc.data.data() + static_cast<size_t>(i) * acc.cols;
        for (int j = 0; j < acc.cols; ++j) row[j] += u[i] * v[j];
    }
}

RealVector sigmoid(const RealVector& v) {
    RealVector out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        double x = v[i];
        if (x >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-x));
        } else {
            double e = std::exp(x);
            out[i] = e / (1.0 + e);
        }
    }
    return out;
}

RealVector tanh_elem(const RealVector& v) {
    RealVector out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
    return out;
}

RealVector softmax(const RealVector& z) {
    if (z.empty()) throw std::invalid_argument("softmax: empty input");
    double m = *std::max_element(z.begin(), z.end());
    RealVector out(z.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

RealVector log_softmax(const RealVector& z) {
    if (z.empty()) throw std::invalid_argument("log_softmax: empty input");
    double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - m);
    double log_sum = std::log(sum);
    RealVector out(z.size());
    for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] - m - log_sum;
    return out;
}

Matrix uniform_init(SeededRng& rng, int rows, int cols, double scale) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("uniform_init: dims must be >= 1");
    if (scale < 0.0) throw std::invalid_argument("uniform_init: scale must be >= 0");
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.uniform(-scale, scale);
    return m;
}

std::vector<double> finite_diff_gradient(const std::function<double()>& loss,
                                         const std::vector<double*>& params,
                                         double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h must be positive");
    std::vector<double> grad(params.size(), 0.0);
    for (size_t i = 0; i < params.size(); ++i) {
        double saved = *params[i];
        *params[i] = saved + h;
        double lp = loss();
        *params[i] = saved - h;
        double lm = loss();
        *params[i] = saved;
        if (!std::isfinite(lp) || !std::isfinite(lm))
            throw std::runtime_error("finite_diff_gradient: non-finite loss");
        grad[i] = (lp - lm) / (2.0 * h);
    }
    return grad;
}

bool all_finite(const RealVector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data.begin(), m.data.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace seqcap
