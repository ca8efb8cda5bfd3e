#include "gmil/kernels.hpp"

#include "gmil/errors.hpp"

namespace gmil::kernels {
namespace {

const Backend* pick_default() {
#if defined(__x86_64__)
    if (avx2_available()) return &avx2_backend();
#endif
    return &scalar_backend();
}

const Backend*& current() {
    static const Backend* b = pick_default();
    return b;
}

}  // namespace

const Backend& active() { return *current(); }

void force_backend(std::string_view name) {
    if (name == "scalar") {
        current() = &scalar_backend();
        return;
    }
    if (name == "auto") {
        current() = pick_default();
        return;
    }
#if defined(__x86_64__)
    if (name == "avx2") {
        if (!avx2_available()) throw UsageError("avx2 not supported on this host");
        current() = &avx2_backend();
        return;
    }
#endif
    throw UsageError("unknown kernel backend: " + std::string(name));
}

}  // namespace gmil::kernels
