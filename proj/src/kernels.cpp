#include "plansel/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace plansel::kern {
namespace {

const Kernels& pick() {
    const char* force = std::getenv("PLANSEL_KERNELS");
    if (force != nullptr) {
        if (std::strcmp(force, "scalar") == 0) return scalar_table();
        if (std::strcmp(force, "avx2") == 0) {
            if (const Kernels* t = avx2_table()) return *t;
            std::fprintf(stderr, "plansel: PLANSEL_KERNELS=avx2 requested but unsupported, using scalar\n");
            return scalar_table();
        }
        std::fprintf(stderr, "plansel: unknown PLANSEL_KERNELS value '%s', using default\n", force);
    }
    if (const Kernels* t = avx2_table()) return *t;
    return scalar_table();
}

}  // namespace

const Kernels& active() {
    static const Kernels& chosen = pick();
    return chosen;
}

}  // namespace plansel::kern
