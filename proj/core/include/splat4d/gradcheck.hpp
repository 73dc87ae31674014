#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace splat4d {

/// A named view into live parameter storage, used by the finite-difference
/// oracle to perturb coordinates in place.
struct ParamBlock {
    std::string name;
    double* data = nullptr;
    std::ptrdiff_t size = 0;
};

struct FdWorst {
    std::string block;
    std::ptrdiff_t index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct FdReport {
    double max_rel_err = 0.0;
    FdWorst worst;
    std::ptrdiff_t coords_checked = 0;
};

/// Central-difference check of analytic gradients.
///
/// For every coordinate p of every block: numeric = (f(p+h) - f(p-h)) / (2h),
/// rel_err = |analytic - numeric| / max(|analytic|, |numeric|, denom_floor).
/// `analytic` holds one gradient array per block, aligned with `blocks`.
/// f must read the live storage the blocks point into; it is restored after
/// each perturbation. Throws NumericError if f returns a non-finite value.
FdReport finite_diff_check(const std::function<double()>& f,
                           std::span<const ParamBlock> blocks,
                           std::span<const std::vector<double>> analytic,
                           double h, double denom_floor = 1e-6);

} // namespace splat4d
