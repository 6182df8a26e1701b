#include <atomic>
#include <cstdlib>
#include <string_view>

#include "pvdb/kernels.hpp"

namespace pvdb::kernels {

namespace detail {
#ifndef PVDB_HAVE_AVX2
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif
#ifndef PVDB_HAVE_NEON
const KernelTable* neon_table() noexcept { return nullptr; }
#endif
}  // namespace detail

namespace {

Isa detect() noexcept {
    Isa best = Isa::scalar;
    if (isa_supported(Isa::avx2)) best = Isa::avx2;
    if (isa_supported(Isa::neon)) best = Isa::neon;
    if (const char* env = std::getenv("PVDB_KERNELS")) {
        const std::string_view want{env};
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
            if (want == isa_name(isa)) return isa_supported(isa) ? isa : Isa::scalar;
    }
    return best;
}

std::atomic<int>& active_slot() noexcept {
    static std::atomic<int> slot{static_cast<int>(detect())};
    return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
        case Isa::scalar: break;
    }
    return "scalar";
}

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(PVDB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Isa::neon: return detail::neon_table() != nullptr;
    }
    return false;
}

Isa active_isa() noexcept { return static_cast<Isa>(active_slot().load(std::memory_order_relaxed)); }

void set_active_isa(Isa isa) noexcept {
    active_slot().store(static_cast<int>(isa_supported(isa) ? isa : Isa::scalar), std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) noexcept {
    if (isa == Isa::avx2 && isa_supported(Isa::avx2)) return *detail::avx2_table();
    if (isa == Isa::neon && isa_supported(Isa::neon)) return *detail::neon_table();
    return detail::scalar_table;
}

}  // namespace pvdb::kernels
