#pragma once

#include <cstddef>

// Double-precision inner-loop kernels. Every entry has a scalar reference
// implementation; an AVX2/FMA table is selected at runtime when the CPU
// supports it. The two tables are equivalence-tested against each other.
namespace plansel::kern {

struct Kernels {
    const char* name;

    // elementwise
    void (*vadd)(const double* a, const double* b, double* out, std::size_t n);
    void (*vsub)(const double* a, const double* b, double* out, std::size_t n);
    void (*vmul)(const double* a, const double* b, double* out, std::size_t n);
    void (*vmul_acc)(const double* a, const double* b, double* out, std::size_t n);  // out += a*b
    void (*vscale)(double c, const double* a, double* out, std::size_t n);           // out = c*a
    void (*vaxpy)(double c, const double* a, double* out, std::size_t n);            // out += c*a

    // reductions
    double (*vdot)(const double* a, const double* b, std::size_t n);
    double (*vsum)(const double* a, std::size_t n);
    double (*vmax)(const double* a, std::size_t n);  // -inf for n == 0

    // activations and their accumulate-into-gradient backward forms
    void (*relu)(const double* a, double* out, std::size_t n);
    void (*leaky_relu)(double slope, const double* a, double* out, std::size_t n);
    void (*relu_mask_acc)(const double* x, const double* g, double* out, std::size_t n);
    void (*leaky_mask_acc)(double slope, const double* x, const double* g, double* out, std::size_t n);
    void (*sigmoid)(const double* a, double* out, std::size_t n);
    void (*tanh_act)(const double* a, double* out, std::size_t n);
    void (*sigmoid_grad_acc)(const double* y, const double* g, double* out, std::size_t n);  // out += g*y*(1-y)
    void (*tanh_grad_acc)(const double* y, const double* g, double* out, std::size_t n);     // out += g*(1-y^2)

    // row-major GEMM; accumulate=false overwrites C
    // gemm_nn: C[m,n] (+)= A[m,k] * B[k,n]
    // gemm_nt: C[m,n] (+)= A[m,k] * B[n,k]^T
    // gemm_tn: C[m,n] (+)= A[k,m]^T * B[k,n]
    void (*gemm_nn)(const double* A, const double* B, double* C,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
    void (*gemm_nt)(const double* A, const double* B, double* C,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
    void (*gemm_tn)(const double* A, const double* B, double* C,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);

    // fused Adam update; bc1/bc2 are the bias-correction denominators 1-beta^t
    void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double bc1, double bc2);
};

// Reference table, always available.
const Kernels& scalar_table();

// AVX2 table, or nullptr when not compiled in / not supported by this CPU.
const Kernels* avx2_table();

// Table picked at startup: AVX2 when available, else scalar. The environment
// variable PLANSEL_KERNELS=scalar|avx2 forces a choice (avx2 falls back to
// scalar with a warning when unsupported).
const Kernels& active();

}  // namespace plansel::kern
