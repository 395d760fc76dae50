#include "plansel/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "plansel/common.hpp"
#include "plansel/kernels.hpp"

namespace plansel::ad {

namespace {

const kern::Kernels& K() { return kern::active(); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()) + ")");
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(std::size_t rows, std::size_t cols, bool requires_grad) : impl_(std::make_shared<Impl>()) {
    impl_->rows = rows;
    impl_->cols = cols;
    impl_->values.assign(rows * cols, 0.0);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    Tensor t(1, 1, requires_grad);
    t.data()[0] = value;
    return t;
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
    Tensor t(m.rows, m.cols, requires_grad);
    std::copy(m.v.begin(), m.v.end(), t.data());
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw Error("Tensor::item: tensor is not 1x1");
    return data()[0];
}

double* Tensor::grad() const {
    if (!impl_->requires_grad) throw Error("Tensor::grad: tensor does not require grad");
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
    return impl_->grad.data();
}

void Tensor::zero_grad() const {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Matrix Tensor::to_matrix() const {
    Matrix m(rows(), cols());
    std::copy(data(), data() + size(), m.v.begin());
    return m;
}

// --- Tape -------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw Error("Tape::backward: loss must be 1x1");
    if (!loss.requires_grad()) throw Error("Tape::backward: loss does not require grad");
    loss.grad()[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
}

// --- primitives ---------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw Error("matmul: inner dimensions disagree (" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + ")");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.rows(), b.cols(), rg);
    K().gemm_nn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), false);
    if (rg) {
        tape.record([a, b, out] {
            const double* g = out.grad();
            if (a.requires_grad())
                K().gemm_nt(g, b.data(), a.grad(), a.rows(), out.cols(), a.cols(), true);
            if (b.requires_grad())
                K().gemm_tn(a.data(), g, b.grad(), a.cols(), a.rows(), out.cols(), true);
        });
    }
    return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.rows(), a.cols(), rg);
    K().vadd(a.data(), b.data(), out.data(), out.size());
    if (rg) {
        tape.record([a, b, out] {
            const double* g = out.grad();
            if (a.requires_grad()) K().vaxpy(1.0, g, a.grad(), out.size());
            if (b.requires_grad()) K().vaxpy(1.0, g, b.grad(), out.size());
        });
    }
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.rows(), a.cols(), rg);
    K().vsub(a.data(), b.data(), out.data(), out.size());
    if (rg) {
        tape.record([a, b, out] {
            const double* g = out.grad();
            if (a.requires_grad()) K().vaxpy(1.0, g, a.grad(), out.size());
            if (b.requires_grad()) K().vaxpy(-1.0, g, b.grad(), out.size());
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.rows(), a.cols(), rg);
    K().vmul(a.data(), b.data(), out.data(), out.size());
    if (rg) {
        tape.record([a, b, out] {
            const double* g = out.grad();
            if (a.requires_grad()) K().vmul_acc(g, b.data(), a.grad(), out.size());
            if (b.requires_grad()) K().vmul_acc(g, a.data(), b.grad(), out.size());
        });
    }
    return out;
}

Tensor add_rowvec(Tape& tape, const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols())
        throw Error("add_rowvec: bias must be 1x" + std::to_string(a.cols()));
    const bool rg = a.requires_grad() || bias.requires_grad();
    Tensor out(a.rows(), a.cols(), rg);
    for (std::size_t r = 0; r < a.rows(); ++r)
        K().vadd(a.data() + r * a.cols(), bias.data(), out.data() + r * a.cols(), a.cols());
    if (rg) {
        tape.record([a, bias, out] {
            const double* g = out.grad();
            if (a.requires_grad()) K().vaxpy(1.0, g, a.grad(), out.size());
            if (bias.requires_grad())
                for (std::size_t r = 0; r < out.rows(); ++r)
                    K().vaxpy(1.0, g + r * out.cols(), bias.grad(), out.cols());
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
    Tensor out(a.rows(), a.cols(), a.requires_grad());
    K().vscale(c, a.data(), out.data(), out.size());
    if (a.requires_grad())
        tape.record([a, out, c] { K().vaxpy(c, out.grad(), a.grad(), out.size()); });
    return out;
}

Tensor mul_scalar(Tape& tape, const Tensor& a, const Tensor& s) {
    if (s.size() != 1) throw Error("mul_scalar: scale must be 1x1");
    const bool rg = a.requires_grad() || s.requires_grad();
    Tensor out(a.rows(), a.cols(), rg);
    K().vscale(s.item(), a.data(), out.data(), out.size());
    if (rg) {
        tape.record([a, s, out] {
            const double* g = out.grad();
            if (a.requires_grad()) K().vaxpy(s.item(), g, a.grad(), out.size());
            if (s.requires_grad()) s.grad()[0] += K().vdot(g, a.data(), out.size());
        });
    }
    return out;
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
    Tensor out(a.rows(), a.cols(), a.requires_grad());
    K().sigmoid(a.data(), out.data(), out.size());
    if (a.requires_grad())
        tape.record([a, out] { K().sigmoid_grad_acc(out.data(), out.grad(), a.grad(), out.size()); });
    return out;
}

Tensor tanh_act(Tape& tape, const Tensor& a) {
    Tensor out(a.rows(), a.cols(), a.requires_grad());
    K().tanh_act(a.data(), out.data(), out.size());
    if (a.requires_grad())
        tape.record([a, out] { K().tanh_grad_acc(out.data(), out.grad(), a.grad(), out.size()); });
    return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
    Tensor out(a.rows(), a.cols(), a.requires_grad());
    K().relu(a.data(), out.data(), out.size());
    if (a.requires_grad())
        tape.record([a, out] { K().relu_mask_acc(a.data(), out.grad(), a.grad(), out.size()); });
    return out;
}

Tensor leaky_relu(Tape& tape, const Tensor& a, double slope) {
    Tensor out(a.rows(), a.cols(), a.requires_grad());
    K().leaky_relu(slope, a.data(), out.data(), out.size());
    if (a.requires_grad())
        tape.record(
            [a, out, slope] { K().leaky_mask_acc(slope, a.data(), out.grad(), a.grad(), out.size()); });
    return out;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw Error("concat_cols: row counts disagree");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.rows(), a.cols() + b.cols(), rg);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        std::memcpy(out.data() + r * out.cols(), a.data() + r * a.cols(), a.cols() * sizeof(double));
        std::memcpy(out.data() + r * out.cols() + a.cols(), b.data() + r * b.cols(),
                    b.cols() * sizeof(double));
    }
    if (rg) {
        tape.record([a, b, out] {
            const double* g = out.grad();
            for (std::size_t r = 0; r < out.rows(); ++r) {
                if (a.requires_grad())
                    K().vaxpy(1.0, g + r * out.cols(), a.grad() + r * a.cols(), a.cols());
                if (b.requires_grad())
                    K().vaxpy(1.0, g + r * out.cols() + a.cols(), b.grad() + r * b.cols(), b.cols());
            }
        });
    }
    return out;
}

Tensor gather_rows(Tape& tape, const Tensor& a, const std::vector<std::int32_t>& idx) {
    for (std::int32_t i : idx)
        if (i < 0 || static_cast<std::size_t>(i) >= a.rows())
            throw Error("gather_rows: index " + std::to_string(i) + " out of range");
    Tensor out(idx.size(), a.cols(), a.requires_grad());
    const std::size_t c = a.cols();
    for (std::size_t e = 0; e < idx.size(); ++e)
        std::memcpy(out.data() + e * c, a.data() + static_cast<std::size_t>(idx[e]) * c,
                    c * sizeof(double));
    if (a.requires_grad()) {
        tape.record([a, out, idx] {
            const double* g = out.grad();
            double* ga = a.grad();
            const std::size_t c = a.cols();
            for (std::size_t e = 0; e < idx.size(); ++e)
                K().vaxpy(1.0, g + e * c, ga + static_cast<std::size_t>(idx[e]) * c, c);
        });
    }
    return out;
}

Tensor scale_rows(Tape& tape, const Tensor& a, const std::vector<double>& coeff) {
    if (coeff.size() != a.rows()) throw Error("scale_rows: coefficient count mismatch");
    Tensor out(a.rows(), a.cols(), a.requires_grad());
    for (std::size_t r = 0; r < a.rows(); ++r)
        K().vscale(coeff[r], a.data() + r * a.cols(), out.data() + r * a.cols(), a.cols());
    if (a.requires_grad()) {
        tape.record([a, out, coeff] {
            const double* g = out.grad();
            const std::size_t c = a.cols();
            for (std::size_t r = 0; r < a.rows(); ++r)
                K().vaxpy(coeff[r], g + r * c, a.grad() + r * c, c);
        });
    }
    return out;
}

Tensor mul_colvec(Tape& tape, const Tensor& a, const Tensor& w) {
    if (w.cols() != 1 || w.rows() != a.rows())
        throw Error("mul_colvec: weight must be " + std::to_string(a.rows()) + "x1");
    const bool rg = a.requires_grad() || w.requires_grad();
    Tensor out(a.rows(), a.cols(), rg);
    for (std::size_t r = 0; r < a.rows(); ++r)
        K().vscale(w.data()[r], a.data() + r * a.cols(), out.data() + r * a.cols(), a.cols());
    if (rg) {
        tape.record([a, w, out] {
            const double* g = out.grad();
            const std::size_t c = a.cols();
            for (std::size_t r = 0; r < a.rows(); ++r) {
                if (a.requires_grad()) K().vaxpy(w.data()[r], g + r * c, a.grad() + r * c, c);
                if (w.requires_grad()) w.grad()[r] += K().vdot(g + r * c, a.data() + r * c, c);
            }
        });
    }
    return out;
}

Tensor segment_sum(Tape& tape, const Tensor& messages, const std::vector<std::int32_t>& dst,
                   std::size_t num_nodes) {
    if (dst.size() != messages.rows()) throw Error("segment_sum: one dst index per message row required");
    for (std::int32_t d : dst)
        if (d < 0 || static_cast<std::size_t>(d) >= num_nodes)
            throw Error("segment_sum: dst index " + std::to_string(d) + " out of range");
    Tensor out(num_nodes, messages.cols(), messages.requires_grad());
    const std::size_t c = messages.cols();
    for (std::size_t e = 0; e < dst.size(); ++e)
        K().vaxpy(1.0, messages.data() + e * c, out.data() + static_cast<std::size_t>(dst[e]) * c, c);
    if (messages.requires_grad()) {
        tape.record([messages, out, dst] {
            const double* g = out.grad();
            double* gm = messages.grad();
            const std::size_t c = messages.cols();
            for (std::size_t e = 0; e < dst.size(); ++e)
                K().vaxpy(1.0, g + static_cast<std::size_t>(dst[e]) * c, gm + e * c, c);
        });
    }
    return out;
}

Tensor segment_softmax(Tape& tape, const Tensor& logits, const std::vector<std::int32_t>& dst,
                       std::size_t num_groups) {
    if (logits.cols() != 1) throw Error("segment_softmax: logits must be Ex1");
    if (dst.size() != logits.rows()) throw Error("segment_softmax: one group index per logit required");
    for (std::int32_t d : dst)
        if (d < 0 || static_cast<std::size_t>(d) >= num_groups)
            throw Error("segment_softmax: group index " + std::to_string(d) + " out of range");
    const std::size_t e_count = dst.size();
    Tensor out(e_count, 1, logits.requires_grad());
    std::vector<double> gmax(num_groups, -std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < e_count; ++e) {
        const double z = logits.data()[e];
        double& m = gmax[static_cast<std::size_t>(dst[e])];
        if (z > m) m = z;
    }
    std::vector<double> gsum(num_groups, 0.0);
    for (std::size_t e = 0; e < e_count; ++e) {
        const double x = std::exp(logits.data()[e] - gmax[static_cast<std::size_t>(dst[e])]);
        out.data()[e] = x;
        gsum[static_cast<std::size_t>(dst[e])] += x;
    }
    for (std::size_t e = 0; e < e_count; ++e) out.data()[e] /= gsum[static_cast<std::size_t>(dst[e])];
    if (logits.requires_grad()) {
        tape.record([logits, out, dst, num_groups] {
            // dz_e = a_e * (g_e - sum_{j in group} a_j g_j)
            const double* g = out.grad();
            const double* alpha = out.data();
            std::vector<double> inner(num_groups, 0.0);
            for (std::size_t e = 0; e < dst.size(); ++e)
                inner[static_cast<std::size_t>(dst[e])] += alpha[e] * g[e];
            double* gl = logits.grad();
            for (std::size_t e = 0; e < dst.size(); ++e)
                gl[e] += alpha[e] * (g[e] - inner[static_cast<std::size_t>(dst[e])]);
        });
    }
    return out;
}

Tensor reduce_mean_rows(Tape& tape, const Tensor& a) {
    if (a.rows() == 0) throw Error("reduce_mean_rows: empty input");
    Tensor out(1, a.cols(), a.requires_grad());
    for (std::size_t r = 0; r < a.rows(); ++r) K().vaxpy(1.0, a.data() + r * a.cols(), out.data(), a.cols());
    K().vscale(1.0 / static_cast<double>(a.rows()), out.data(), out.data(), a.cols());
    if (a.requires_grad()) {
        tape.record([a, out] {
            const double inv = 1.0 / static_cast<double>(a.rows());
            for (std::size_t r = 0; r < a.rows(); ++r)
                K().vaxpy(inv, out.grad(), a.grad() + r * a.cols(), a.cols());
        });
    }
    return out;
}

Tensor reduce_sum_rows(Tape& tape, const Tensor& a) {
    Tensor out(1, a.cols(), a.requires_grad());
    for (std::size_t r = 0; r < a.rows(); ++r) K().vaxpy(1.0, a.data() + r * a.cols(), out.data(), a.cols());
    if (a.requires_grad()) {
        tape.record([a, out] {
            for (std::size_t r = 0; r < a.rows(); ++r)
                K().vaxpy(1.0, out.grad(), a.grad() + r * a.cols(), a.cols());
        });
    }
    return out;
}

Tensor loss_mse(Tape& tape, const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "loss_mse");
    const std::size_t n = pred.size();
    if (n == 0) throw Error("loss_mse: empty input");
    const bool rg = pred.requires_grad() || target.requires_grad();
    Tensor out(1, 1, rg);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    out.data()[0] = acc / static_cast<double>(n);
    if (rg) {
        tape.record([pred, target, out] {
            const double g = out.grad()[0];
            const std::size_t n = pred.size();
            const double c = 2.0 * g / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double d = pred.data()[i] - target.data()[i];
                if (pred.requires_grad()) pred.grad()[i] += c * d;
                if (target.requires_grad()) target.grad()[i] -= c * d;
            }
        });
    }
    return out;
}

Tensor loss_bce_logits(Tape& tape, const Tensor& logits, const Tensor& targets) {
    check_same_shape(logits, targets, "loss_bce_logits");
    const std::size_t n = logits.size();
    if (n == 0) throw Error("loss_bce_logits: empty input");
    for (std::size_t i = 0; i < n; ++i) {
        const double y = targets.data()[i];
        if (y != 0.0 && y != 1.0) throw Error("loss_bce_logits: targets must be 0 or 1");
    }
    Tensor out(1, 1, logits.requires_grad());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // softplus(-z*(2y-1)) = max(x,0) + log1p(exp(-|x|)) with x = -z*(2y-1)
        const double x = -logits.data()[i] * (2.0 * targets.data()[i] - 1.0);
        acc += (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    out.data()[0] = acc / static_cast<double>(n);
    if (logits.requires_grad()) {
        tape.record([logits, targets, out] {
            const double g = out.grad()[0];
            const std::size_t n = logits.size();
            const double c = g / static_cast<double>(n);
            double* gl = logits.grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double s = 1.0 / (1.0 + std::exp(-logits.data()[i]));
                gl[i] += c * (s - targets.data()[i]);
            }
        });
    }
    return out;
}

// --- optimizer ----------------------------------------------------------------

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw Error("adam_step: state does not match parameter list");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (state.m[i].size() != p.size()) throw Error("adam_step: moment shape mismatch");
        K().adam_update(p.data(), p.grad(), state.m[i].data(), state.v[i].data(), p.size(), state.lr,
                        state.beta1, state.beta2, state.eps, bc1, bc2);
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (Tensor& p : params) p.zero_grad();
}

// --- gradient checking ----------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(Tape&, std::vector<Tensor>&)>& fn,
                           std::vector<Tensor>& inputs, double step) {
    GradCheckReport report;

    Tape tape;
    for (Tensor& t : inputs)
        if (t.requires_grad()) t.zero_grad();
    Tensor loss = fn(tape, inputs);
    if (loss.size() != 1) throw Error("grad_check: fn must return a 1x1 loss");
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    for (Tensor& t : inputs) {
        if (!t.requires_grad()) {
            analytic.emplace_back();
            continue;
        }
        analytic.emplace_back(t.grad(), t.grad() + t.size());
    }

    auto eval = [&]() {
        Tape fwd;
        Tensor l = fn(fwd, inputs);
        const double v = l.item();
        if (!std::isfinite(v)) throw Error("grad_check: non-finite loss value");
        return v;
    };
    const double center = eval();

    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = inputs[ti];
        if (!t.requires_grad()) continue;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + step;
            const double up = eval();
            t.data()[i] = saved - step;
            const double down = eval();
            t.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[ti][i];
            if (!std::isfinite(a) || !std::isfinite(numeric))
                throw Error("grad_check: non-finite gradient");
            // one-sided slopes disagree when a kink sits inside the interval
            const double forward = (up - center) / step;
            const double backward = (center - down) / step;
            const double scale = std::max({1.0, std::abs(forward), std::abs(backward)});
            if (std::abs(forward - backward) > 1e-2 * scale) {
                report.skipped_nonsmooth += 1;
                continue;
            }
            const double abs_err = std::abs(a - numeric);
            const double rel_err = abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
            report.max_abs_err = std::max(report.max_abs_err, abs_err);
            report.max_rel_err = std::max(report.max_rel_err, rel_err);
            report.checked += 1;
        }
    }

    return report;
}

}  // namespace plansel::ad
