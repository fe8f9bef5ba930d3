#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace seqcap {

using RealVector = std::vector<double>;

// Dense row-major matrix of doubles. All model weights live in these.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Matrix& o) const = default;
};

// Deterministic generator: mt19937_64 under the hood, with uniform and
// gaussian draws derived from the raw 64-bit stream so that a given seed
// always yields the same values.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [lo, hi). 53-bit mantissa construction.
    double uniform(double lo, double hi) {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t next_below(uint64_t n);

    // Box-Muller, two uniform draws per call.
    double gaussian(double mean, double sigma);

    // Fisher-Yates over any indexable container.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// y = m * v. Throws std::invalid_argument on dimension mismatch.
RealVector matvec(const Matrix& m, const RealVector& v);

// y = m^T * v.
RealVector matvec_transpose(const Matrix& m, const RealVector& v);

// acc += u * v^T (outer product).
void add_outer(Matrix& acc, const RealVector& u, const RealVector& v);

// Elementwise nonlinearities. sigmoid uses the sign-split form so large
// magnitudes saturate instead of overflowing.
RealVector sigmoid(const RealVector& v);
RealVector tanh_elem(const RealVector& v);

// Probability distribution over logits, max-subtracted for stability.
RealVector softmax(const RealVector& z);

// log softmax(z), same stabilization; avoids the exp/log round trip when
// only the log-probabilities are needed.
RealVector log_softmax(const RealVector& z);

// Entries i.i.d. uniform in [-scale, scale], drawn row-major.
Matrix uniform_init(SeededRng& rng, int rows, int cols, double scale);

// Central-difference gradient of `loss` with respect to the entries behind
// `params`. Each pointer is nudged by +-h in turn and restored. Throws if
// the loss comes back non-finite.
std::vector<double> finite_diff_gradient(const std::function<double()>& loss,
                                         const std::vector<double*>& params,
                                         double h = 1e-5);

bool all_finite(const RealVector& v);
bool all_finite(const Matrix& m);

}  // namespace seqcap
