#include "seqcap/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace seqcap {

namespace {

void check_dims(const LstmLayerParams& p, const RealVector& x, const LstmState& prev) {
    if (static_cast<int>(x.size()) != p.input_dim)
        throw std::invalid_argument("lstm_step: input dimension mismatch");
    if (static_cast<int>(prev.h.size()) != p.hidden_dim ||
        static_cast<int>(prev.c.size()) != p.hidden_dim)
        throw std::invalid_argument("lstm_step: state dimension mismatch");
}

// a = W_x x + W_h h_prev [+ b]
RealVector gate_preact(const Matrix& w_x, const Matrix& w_h, const RealVector& b,
                       const RealVector& x, const RealVector& h_prev, bool has_bias) {
    RealVector a = matvec(w_x, x);
    RealVector ah = matvec(w_h, h_prev);
    for (size_t k = 0; k < a.size(); ++k) {
        a[k] += ah[k];
        if (has_bias) a[k] += b[k];
    }
    return a;
}

}  // namespace

LstmState zero_state(int hidden_dim) {
    return LstmState{RealVector(hidden_dim, 0.0), RealVector(hidden_dim, 0.0)};
}

std::pair<LstmState, StepCache> lstm_step_forward(const LstmLayerParams& p,
                                                  const RealVector& x,
                                                  const LstmState& prev) {
    check_dims(p, x, prev);

    StepCache cache;
    cache.x = x;
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;

    cache.i = sigmoid(gate_preact(p.w_xi, p.w_hi, p.b_i, x, prev.h, p.has_bias));
    cache.f = sigmoid(gate_preact(p.w_xf, p.w_hf, p.b_f, x, prev.h, p.has_bias));
    cache.o = sigmoid(gate_preact(p.w_xo, p.w_ho, p.b_o, x, prev.h, p.has_bias));
    cache.g = tanh_elem(gate_preact(p.w_xc, p.w_hc, p.b_c, x, prev.h, p.has_bias));

    int n = p.hidden_dim;
    cache.c.resize(n);
    cache.h.resize(n);
    for (int k = 0; k < n; ++k) {
        cache.c[k] = cache.f[k] * prev.c[k] + cache.i[k] * cache.g[k];
        cache.h[k] = cache.o[k] * std::tanh(cache.c[k]);
    }

    return {LstmState{cache.h, cache.c}, cache};
}

LstmStepInputGrads lstm_step_backward(const LstmLayerParams& p,
                                      const StepCache& cache,
                                      const RealVector& dh,
                                      const RealVector& dc,
                                      LstmLayerParams& grads) {
    int n = p.hidden_dim;
    if (static_cast<int>(dh.size()) != n || static_cast<int>(dc.size()) != n)
        throw std::invalid_argument("lstm_step_backward: gradient dimension mismatch");
    if (grads.input_dim != p.input_dim || grads.hidden_dim != p.hidden_dim)
        throw std::invalid_argument("lstm_step_backward: grad buffer shape mismatch");

    // h = o (.) tanh(c), then c = f (.) c_prev + i (.) g.
    RealVector da_i(n), da_f(n), da_o(n), da_g(n), dc_prev(n);
    for (int k = 0; k < n; ++k) {
        double tc = std::tanh(cache.c[k]);
        double do_ = dh[k] * tc;
        double dc_total = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);

        double di = dc_total * cache.g[k];
        double df = dc_total * cache.c_prev[k];
        double dg = dc_total * cache.i[k];
        dc_prev[k] = dc_total * cache.f[k];

        da_i[k] = di * cache.i[k] * (1.0 - cache.i[k]);
        da_f[k] = df * cache.f[k] * (1.0 - cache.f[k]);
        da_o[k] = do_ * cache.o[k] * (1.0 - cache.o[k]);
        da_g[k] = dg * (1.0 - cache.g[k] * cache.g[k]);
    }

    add_outer(grads.w_xi, da_i, cache.x);
    add_outer(grads.w_xf, da_f, cache.x);
    add_outer(grads.w_xo, da_o, cache.x);
    add_outer(grads.w_xc, da_g, cache.x);
    add_outer(grads.w_hi, da_i, cache.h_prev);
    add_outer(grads.w_hf, da_f, cache.h_prev);
    add_outer(grads.w_ho, da_o, cache.h_prev);
    add_outer(grads.w_hc, da_g, cache.h_prev);
    if (p.has_bias) {
        for (int k = 0; k < n; ++k) {
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_o[k] += da_o[k];
            grads.b_c[k] += da_g[k];
        }
    }

    LstmStepInputGrads out;
    out.dc_prev = std::move(dc_prev);

    out.dx = matvec_transpose(p.w_xi, da_i);
    RealVector t = matvec_transpose(p.w_xf, da_f);
    for (size_t k = 0; k < out.dx.size(); ++k) out.dx[k] += t[k];
    t = matvec_transpose(p.w_xo, da_o);
    for (size_t k = 0; k < out.dx.size(); ++k) out.dx[k] += t[k];
    t = matvec_transpose(p.w_xc, da_g);
    for (size_t k = 0; k < out.dx.size(); ++k) out.dx[k] += t[k];

    out.dh_prev = matvec_transpose(p.w_hi, da_i);
    t = matvec_transpose(p.w_hf, da_f);
    for (size_t k = 0; k < out.dh_prev.size(); ++k) out.dh_prev[k] += t[k];
    t = matvec_transpose(p.w_ho, da_o);
    for (size_t k = 0; k < out.dh_prev.size(); ++k) out.dh_prev[k] += t[k];
    t = matvec_transpose(p.w_hc, da_g);
    for (size_t k = 0; k < out.dh_prev.size(); ++k) out.dh_prev[k] += t[k];

    return out;
}

RealVector rnn_step_forward(const RnnLayerParams& p, const RealVector& x,
                            const RealVector& h_prev) {
    RealVector a = matvec(p.w_xh, x);
    RealVector ah = matvec(p.w_hh, h_prev);
    if (a.size() != ah.size())
        throw std::invalid_argument("rnn_step_forward: dimension mismatch");
    for (size_t k = 0; k < a.size(); ++k) a[k] += ah[k];
    return p.nonlinearity == RnnNonlinearity::tanh ? tanh_elem(a) : sigmoid(a);
}

LstmLayerParams init_layer(SeededRng& rng, int input_dim, int hidden_dim,
                           double scale, bool biases_on) {
    if (input_dim < 1 || hidden_dim < 1)
        throw std::invalid_argument("init_layer: dims must be >= 1");
    LstmLayerParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.has_bias = biases_on;
    p.w_xi = uniform_init(rng, hidden_dim, input_dim, scale);
    p.w_hi = uniform_init(rng, hidden_dim, hidden_dim, scale);
    p.w_xf = uniform_init(rng, hidden_dim, input_dim, scale);
    p.w_hf = uniform_init(rng, hidden_dim, hidden_dim, scale);
    p.w_xo = uniform_init(rng, hidden_dim, input_dim, scale);
    p.w_ho = uniform_init(rng, hidden_dim, hidden_dim, scale);
    p.w_xc = uniform_init(rng, hidden_dim, input_dim, scale);
    p.w_hc = uniform_init(rng, hidden_dim, hidden_dim, scale);
    if (biases_on) {
        p.b_i.assign(hidden_dim, 0.0);
        p.b_f.assign(hidden_dim, 0.0);
        p.b_o.assign(hidden_dim, 0.0);
        p.b_c.assign(hidden_dim, 0.0);
    }
    return p;
}

LstmLayerParams zero_like(const LstmLayerParams& p) {
    LstmLayerParams z;
    z.input_dim = p.input_dim;
    z.hidden_dim = p.hidden_dim;
    z.has_bias = p.has_bias;
    z.w_xi = Matrix(p.hidden_dim, p.input_dim);
    z.w_hi = Matrix(p.hidden_dim, p.hidden_dim);
    z.w_xf = Matrix(p.hidden_dim, p.input_dim);
    z.w_hf = Matrix(p.hidden_dim, p.hidden_dim);
    z.w_xo = Matrix(p.hidden_dim, p.input_dim);
    z.w_ho = Matrix(p.hidden_dim, p.hidden_dim);
    z.w_xc = Matrix(p.hidden_dim, p.input_dim);
    z.w_hc = Matrix(p.hidden_dim, p.hidden_dim);
    if (p.has_bias) {
        z.b_i.assign(p.hidden_dim, 0.0);
        z.b_f.assign(p.hidden_dim, 0.0);
        z.b_o.assign(p.hidden_dim, 0.0);
        z.b_c.assign(p.hidden_dim, 0.0);
    }
    return z;
}

std::vector<double*> param_view(LstmLayerParams& p) {
    std::vector<double*> view;
    auto add_matrix = [&view](Matrix& m) {
        for (double& x : m.data) view.push_back(&x);
    };
    auto add_vector = [&view](RealVector& v) {
        for (double& x : v) view.push_back(&x);
    };
    add_matrix(p.w_xi);
    add_matrix(p.w_hi);
    add_matrix(p.w_xf);
    add_matrix(p.w_hf);
    add_matrix(p.w_xo);
    add_matrix(p.w_ho);
    add_matrix(p.w_xc);
    add_matrix(p.w_hc);
    if (p.has_bias) {
        add_vector(p.b_i);
        add_vector(p.b_f);
        add_vector(p.b_o);
        add_vector(p.b_c);
    }
    return view;
}

}  // namespace seqcap
