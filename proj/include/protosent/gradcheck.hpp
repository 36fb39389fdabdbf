#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "protosent/ops.hpp"

namespace protosent {

// Central finite differences against the analytic backward pass. The forward
// builder is re-run from leaf values on every probe, so the two derivative
// routes share no code beyond the forward evaluation itself.

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = true;
};

inline double gradcheck_rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

// Checks d(loss)/d(leaf[element]) for every listed (leaf, element) pair.
// `build` must construct a fresh scalar loss from the leaves' current values.
inline double check_gradient_entries(const std::vector<Tensor>& leaves,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& entries,
                                     const std::function<Tensor()>& build, double h = 1e-5) {
    Tensor loss = build();
    for (const auto& leaf : leaves) leaf.node()->grad.assign(leaf.numel(), real(0));
    backward(loss);

    std::vector<double> analytic;
    analytic.reserve(entries.size());
    for (const auto& [li, ei] : entries) analytic.push_back(leaves[li].node()->grad[ei]);

    double worst = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        auto [li, ei] = entries[k];
        Tensor leaf = leaves[li];
        const real saved = leaf.values()[ei];
        leaf.values_mut()[ei] = saved + static_cast<real>(h);
        const double fplus = build().item();
        leaf.values_mut()[ei] = saved - static_cast<real>(h);
        const double fminus = build().item();
        leaf.values_mut()[ei] = saved;
        const double numeric = (fplus - fminus) / (2.0 * h);
        worst = std::max(worst, gradcheck_rel_err(analytic[k], numeric));
    }
    return worst;
}

// Convenience: check every element of every leaf.
inline double check_gradients(const std::vector<Tensor>& leaves, const std::function<Tensor()>& build,
                              double h = 1e-5) {
    std::vector<std::pair<std::size_t, std::size_t>> entries;
    for (std::size_t li = 0; li < leaves.size(); ++li)
        for (std::size_t ei = 0; ei < leaves[li].numel(); ++ei) entries.emplace_back(li, ei);
    return check_gradient_entries(leaves, entries, build, h);
}

// Finite-difference suite over every differentiable op, on small randomly
// seeded shapes. Shared by the unit tests, the acceptance suite, and the
// `gradcheck` CLI subcommand.
inline std::vector<GradCheckReport> run_op_gradient_checks(std::uint64_t seed = 17,
                                                           double tolerance = 1e-4) {
    std::vector<GradCheckReport> reports;
    auto run = [&](const std::string& name, const std::vector<Tensor>& leaves,
                   const std::function<Tensor()>& build) {
        GradCheckReport r;
        r.name = name;
        r.max_rel_err = check_gradients(leaves, build);
        r.pass = r.max_rel_err < tolerance;
        reports.push_back(r);
    };

    Rng rng(seed);
    auto rand_t = [&](std::size_t r, std::size_t c) { return Tensor::randn(r, c, rng, 1.0, true); };

    {
        Tensor a = rand_t(3, 4), b = rand_t(4, 2);
        run("matmul", {a, b}, [&] { return sum_all(square(matmul(a, b))); });
    }
    {
        Tensor a = rand_t(2, 3);
        Tensor w = rand_t(1, 3);
        run("softmax", {a}, [&] { return sum_all(mul(softmax_rows(a), w)); });
    }
    {
        Tensor x = rand_t(2, 4), g = rand_t(1, 4), b = rand_t(1, 4);
        run("layer_norm", {x, g, b}, [&] { return sum_all(square(layer_norm(x, g, b, 1e-5))); });
    }
    {
        Tensor x = rand_t(3, 3);
        // keep probes away from the relu kink
        for (auto& v : x.values_mut())
            if (std::abs(static_cast<double>(v)) < 0.05) v += real(0.1);
        run("relu", {x}, [&] { return sum_all(square(relu(x))); });
    }
    {
        Tensor x = rand_t(2, 5);
        run("sigmoid", {x}, [&] { return sum_all(square(sigmoid(x))); });
    }
    {
        Tensor a = rand_t(2, 3), b = rand_t(2, 3);
        run("concat", {a, b}, [&] {
            Tensor stacked = concat({a, b}, 0);                          // 4x3
            Tensor side = concat({transpose(a), transpose(b)}, 1);       // 3x4
            return sum_all(square(matmul(stacked, side)));
        });
    }
    {
        Tensor a = rand_t(3, 4);
        run("mean", {a}, [&] { return sum_all(square(concat({mean_axis(a, 0), transpose(mean_axis(a, 1))}, 1))); });
    }
    {
        Tensor a = rand_t(4, 3);
        // fixed mask: rebuilding with the same seed freezes the dropout draw
        run("dropout", {a}, [&] {
            Rng drop_rng(99);
            return sum_all(square(dropout(a, 0.3, drop_rng, true)));
        });
    }
    {
        Tensor a = rand_t(2, 3), b = rand_t(2, 3);
        for (auto& v : b.values_mut()) v = std::abs(v) + real(0.5);
        run("add_sub_mul_div", {a, b}, [&] {
            Tensor u = div(mul(add(a, b), sub(a, b)), b);
            return sum_all(square(u));
        });
    }
    {
        Tensor a = rand_t(2, 3), brow = rand_t(1, 3), bcol = rand_t(2, 1), s = rand_t(1, 1);
        for (auto& v : bcol.values_mut()) v = std::abs(v) + real(0.5);
        run("broadcast", {a, brow, bcol, s}, [&] {
            return sum_all(square(div(mul(add(a, brow), s), bcol)));
        });
    }
    {
        Tensor a = rand_t(2, 4);
        for (auto& v : a.values_mut()) v = std::abs(v) + real(0.5);
        run("sqrt", {a}, [&] { return sum_all(square(sqrt_elem(a))); });
    }
    {
        Tensor a = rand_t(3, 5);
        run("slice_transpose", {a}, [&] {
            return sum_all(square(matmul(slice_cols(a, 1, 2), transpose(slice_cols(a, 3, 2)))));
        });
    }
    {
        Tensor a = rand_t(3, 4);
        run("sum_scale", {a}, [&] { return scale(sum_all(square(a)), 0.37); });
    }
    return reports;
}

}  // namespace protosent
