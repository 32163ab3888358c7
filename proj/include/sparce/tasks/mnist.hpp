#pragma once

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>
#include <vector>

#include "sparce/readout.hpp"
#include "sparce/reservoir.hpp"
#include "sparce/rng.hpp"

namespace sparce {

/// How an image becomes an input sequence: one 28-pixel column per step
/// (T=28, N_in=28); the same after a fixed pixel permutation; or one pixel
/// per step after a fixed permutation (T=784, N_in=1).
enum class MnistVariant { column, permuted_column, permuted_pixel };

inline std::vector<Index> identity_permutation(Index n) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index(0));
    return perm;
}

inline std::vector<Index> make_permutation(Index n, std::uint64_t seed) {
    auto perm = identity_permutation(n);
    auto engine = make_engine(derive_seed(seed, "mnist.permutation"));
    std::shuffle(perm.begin(), perm.end(), engine);
    return perm;
}

inline Index variant_steps(MnistVariant variant) {
    return variant == MnistVariant::permuted_pixel ? 784 : 28;
}

inline Index variant_inputs(MnistVariant variant) {
    return variant == MnistVariant::permuted_pixel ? 1 : 28;
}

/// Renders one 28x28 image (row-major, values in [0,1]) into its T x N_in
/// sequence. `perm` must be a bijection over 0..783 for the permuted
/// variants; the column variant ignores it.
template <class Scalar, class Derived>
Matrix<Scalar> image_sequence(const Eigen::MatrixBase<Derived>& image, MnistVariant variant,
                              const std::vector<Index>& perm) {
    require(image.size() == 784, "image_sequence: expected a flat 28x28 image");
    const bool permuted = variant != MnistVariant::column;
    if (permuted) require(perm.size() == 784, "image_sequence: permutation must cover 784 pixels");
    auto pixel = [&](Index i) {
        const Index src = permuted ? perm[static_cast<std::size_t>(i)] : i;
        return static_cast<Scalar>(image(src));
    };
    if (variant == MnistVariant::permuted_pixel) {
        Matrix<Scalar> seq(784, 1);
        for (Index t = 0; t < 784; ++t) seq(t, 0) = pixel(t);
        return seq;
    }
    Matrix<Scalar> seq(28, 28);  // seq(t, r) = pixel at row r of column t
    for (Index t = 0; t < 28; ++t)
        for (Index r = 0; r < 28; ++r) seq(t, r) = pixel(r * 28 + t);
    return seq;
}

namespace detail {

template <class Scalar, class MakeRollout>
Matrix<Scalar> parallel_bank(Index n_images, Index dim, int n_threads,
                             MakeRollout&& make_rollout) {
    Matrix<Scalar> bank(n_images, dim);
    const int workers = n_threads > 0
                            ? n_threads
                            : std::max(1u, std::thread::hardware_concurrency());
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            auto rollout = make_rollout();  // per-worker model clone
            for (Index i = next++; i < n_images; i = next++) rollout(i, bank);
        });
    for (auto& th : pool) th.join();
    return bank;
}

}  // namespace detail

/// Precomputes the readout bank for a fixed reservoir over a set of images:
/// row i holds V-tilde for image i. Images travel one per worker with a
/// private state vector, so results are bit-identical across thread counts.
template <class Scalar>
Matrix<Scalar> mnist_readout_bank(const Reservoir<Scalar>& res, const Matrix<float>& images,
                                  MnistVariant variant, const std::vector<Index>& perm,
                                  const ReadoutPlan& plan, int n_threads = 0) {
    const Index t_len = variant_steps(variant);
    require(res.n_in() == variant_inputs(variant), "mnist_readout_bank: reservoir N_in mismatch");
    const Index dim = plan.dim(res.n_nodes(), t_len);
    return detail::parallel_bank<Scalar>(images.rows(), dim, n_threads, [&] {
        return [&, clone = res](Index i, Matrix<Scalar>& bank) mutable {
            const auto seq = image_sequence<Scalar>(images.row(i).transpose(), variant, perm);
            const auto traj = run_sequence(clone, seq, true);
            bank.row(i) = assemble_readout(traj, plan).transpose();
        };
    });
}

/// Same, driving a two-stage hierarchy; the readout samples the second
/// (slow) reservoir only.
template <class Scalar>
Matrix<Scalar> mnist_readout_bank(const Hierarchy<Scalar>& h, const Matrix<float>& images,
                                  MnistVariant variant, const std::vector<Index>& perm,
                                  const ReadoutPlan& plan, int n_threads = 0) {
    const Index t_len = variant_steps(variant);
    require(h.first.n_in() == variant_inputs(variant), "mnist_readout_bank: hierarchy N_in mismatch");
    const Index dim = plan.dim(h.second.n_nodes(), t_len);
    return detail::parallel_bank<Scalar>(images.rows(), dim, n_threads, [&] {
        return [&, clone = h](Index i, Matrix<Scalar>& bank) mutable {
            const auto seq = image_sequence<Scalar>(images.row(i).transpose(), variant, perm);
            const auto traj = run_hierarchy(clone, seq, true);
            bank.row(i) = assemble_readout(traj, plan).transpose();
        };
    });
}

}  // namespace sparce
