#include "splat4d/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "splat4d/errors.hpp"

namespace splat4d {

FdReport finite_diff_check(const std::function<double()>& f,
                           std::span<const ParamBlock> blocks,
                           std::span<const std::vector<double>> analytic,
                           double h, double denom_floor) {
    if (blocks.size() != analytic.size())
        throw ShapeError("finite_diff_check: one gradient array per block required");
    FdReport report;
    for (size_t b = 0; b < blocks.size(); ++b) {
        const ParamBlock& blk = blocks[b];
        if (static_cast<std::ptrdiff_t>(analytic[b].size()) != blk.size)
            throw ShapeError("finite_diff_check: gradient size mismatch for block '" +
                             blk.name + "'");
        for (std::ptrdiff_t i = 0; i < blk.size; ++i) {
            const double saved = blk.data[i];
            blk.data[i] = saved + h;
            const double f_plus = f();
            blk.data[i] = saved - h;
            const double f_minus = f();
            blk.data[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw NumericError("finite_diff_check: non-finite objective at block '" +
                                   blk.name + "' index " + std::to_string(i));
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double a = analytic[b][i];
            const double denom =
                std::max({std::abs(a), std::abs(numeric), denom_floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = {blk.name, i, a, numeric};
            }
        }
    }
    return report;
}

} // namespace splat4d
