// shape_model.hpp — linear (PCA) generative model over UV displacement maps.
//
// Training maps must share one valid-texel index; the model flattens the
// valid texels into vectors of dimension 3 * n_valid. The basis comes from an
// eigendecomposition of the S x S Gram matrix of the centered data (S is
// tiny next to the texel dimension), scales are singular values divided by
// sqrt(S - 1), and latent coefficients are expressed in units of those
// scales:
//
//     U(c) = mu + B diag(sigma) c,      c ~ N(0, I) when sampling,
//
// with truncation psi scaling c toward the mean. The masked latent fit
// solves the ridge normal equations in closed form; an optional Adam
// refinement minimizes the masked mean L1 error plus an L1 penalty on the
// face-circle region of the reconstruction.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "headcraft/adam.hpp"
#include "headcraft/rng.hpp"
#include "headcraft/uv_map.hpp"

namespace headcraft {

struct LatentCode {
    std::vector<double> coeffs;  // sigma units
};

struct LinearShapeModel {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> valid_index;  // texel indices shared by the dataset
    std::vector<std::uint8_t> face_mask;     // texel-space face circle (may be empty)

    Eigen::VectorXd mean;    // 3 * n_valid
    Eigen::MatrixXd basis;   // (3 * n_valid) x K, orthonormal columns
    Eigen::VectorXd scales;  // K, non-increasing

    int components() const { return static_cast<int>(basis.cols()); }
    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

namespace detail {

inline Eigen::VectorXd flatten_map(const UvMap& map,
                                   const std::vector<std::uint32_t>& valid_index) {
    Eigen::VectorXd v(3 * static_cast<Eigen::Index>(valid_index.size()));
    for (std::size_t i = 0; i < valid_index.size(); ++i) {
        const Vec3& t = map.data[valid_index[i]];
        v[3 * static_cast<Eigen::Index>(i) + 0] = t.x;
        v[3 * static_cast<Eigen::Index>(i) + 1] = t.y;
        v[3 * static_cast<Eigen::Index>(i) + 2] = t.z;
    }
    return v;
}

inline void unflatten_map(const Eigen::VectorXd& v, const LinearShapeModel& model, UvMap& map) {
    map = UvMap(model.width, model.height);
    for (std::size_t i = 0; i < model.valid_index.size(); ++i) {
        std::size_t t = model.valid_index[i];
        map.data[t] = {v[3 * static_cast<Eigen::Index>(i) + 0],
                       v[3 * static_cast<Eigen::Index>(i) + 1],
                       v[3 * static_cast<Eigen::Index>(i) + 2]};
        map.valid[t] = 1;
    }
    map.face_mask = model.face_mask;
}

}  // namespace detail

inline LinearShapeModel fit_pca(const std::vector<UvMap>& maps, int components) {
    if (maps.size() < 2) throw std::runtime_error("fit_pca: need at least 2 maps");
    const int w = maps[0].width, h = maps[0].height;
    for (const UvMap& m : maps) {
        if (m.width != w || m.height != h) throw std::runtime_error("fit_pca: resolution mismatch");
        if (m.valid != maps[0].valid)
            throw std::runtime_error("fit_pca: maps do not share one valid-texel mask");
    }
    LinearShapeModel model;
    model.width = w;
    model.height = h;
    for (std::size_t t = 0; t < maps[0].valid.size(); ++t)
        if (maps[0].valid[t]) model.valid_index.push_back(static_cast<std::uint32_t>(t));
    if (model.valid_index.empty()) throw std::runtime_error("fit_pca: no valid texels");
    model.face_mask = maps[0].face_mask;

    const Eigen::Index S = static_cast<Eigen::Index>(maps.size());
    const Eigen::Index dim = 3 * static_cast<Eigen::Index>(model.valid_index.size());
    if (components < 1 || components > static_cast<int>(S) - 1 ||
        static_cast<Eigen::Index>(components) > dim)
        throw std::runtime_error("fit_pca: component count must be in [1, min(S-1, dim)]");

    Eigen::MatrixXd X(S, dim);
    for (Eigen::Index s = 0; s < S; ++s)
        X.row(s) = detail::flatten_map(maps[static_cast<std::size_t>(s)], model.valid_index);
    model.mean = X.colwise().mean();
    Eigen::MatrixXd C = X.rowwise() - model.mean.transpose();

    // Gram trick: eigenvectors of C C^T lift to right singular vectors.
    Eigen::MatrixXd gram = C * C.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigensolver failed");

    // Eigenvalues ascend; take the top `components` in descending order.
    model.basis.resize(dim, components);
    model.scales.resize(components);
    const double eigen_floor = 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff());
    for (int k = 0; k < components; ++k) {
        Eigen::Index src = S - 1 - k;
        double lambda = eig.eigenvalues()[src];
        if (lambda < eigen_floor)
            throw std::runtime_error("fit_pca: requested components exceed the data rank");
        double singular = std::sqrt(lambda);
        model.basis.col(k) = C.transpose() * eig.eigenvectors().col(src) / singular;
        model.scales[k] = singular / std::sqrt(static_cast<double>(S - 1));
    }
    return model;
}

// U = mu + B diag(sigma) (psi * z). psi = 0 returns the mean bitwise; zero
// coefficients contribute no arithmetic at all.
inline UvMap sample_model(const LinearShapeModel& model, const LatentCode* code, double psi,
                          std::uint64_t seed = 0) {
    if (psi < 0.0) throw std::runtime_error("sample_model: psi must be >= 0");
    std::vector<double> z;
    if (code) {
        if (static_cast<int>(code->coeffs.size()) != model.components())
            throw std::runtime_error("sample_model: latent size mismatch");
        z = code->coeffs;
    } else {
        Rng rng(seed);
        z.resize(static_cast<std::size_t>(model.components()));
        for (double& v : z) v = rng.normal();
    }
    Eigen::VectorXd v = model.mean;
    for (int k = 0; k < model.components(); ++k) {
        double coeff = psi * z[static_cast<std::size_t>(k)] * model.scales[k];
        if (coeff != 0.0) v += model.basis.col(k) * coeff;
    }
    UvMap map;
    detail::unflatten_map(v, model, map);
    return map;
}

inline UvMap reconstruct(const LinearShapeModel& model, const LatentCode& code) {
    return sample_model(model, &code, 1.0);
}

// Projection of a map onto the model (full-information latent).
inline LatentCode project(const LinearShapeModel& model, const UvMap& map) {
    Eigen::VectorXd v = detail::flatten_map(map, model.valid_index) - model.mean;
    LatentCode code;
    code.coeffs.resize(static_cast<std::size_t>(model.components()));
    for (int k = 0; k < model.components(); ++k)
        code.coeffs[static_cast<std::size_t>(k)] = model.basis.col(k).dot(v) / model.scales[k];
    return code;
}

struct MaskedFitOptions {
    double reg = 1e-3;              // ridge weight on the sigma-unit coefficients
    double face_weight = 10.0 / 256.0;  // L1 penalty on the face-circle reconstruction
    int refine_steps = 0;           // 0 = closed form only
    double refine_lr = 1e-2;
};

// Masked latent fit. Closed form: minimize |M (mu + B diag(sigma) c - U)|^2
// + reg |c|^2 over the valid texels selected by `texel_mask`. With reg = 0 a
// singular system throws. Optional Adam refinement on the masked mean-L1
// objective plus the face term.
inline LatentCode fit_latent_masked(const LinearShapeModel& model, const UvMap& target,
                                    const std::vector<std::uint8_t>& texel_mask,
                                    const MaskedFitOptions& opts = {}) {
    if (texel_mask.size() != static_cast<std::size_t>(model.width) * model.height)
        throw std::runtime_error("fit_latent_masked: mask size mismatch");
    const int K = model.components();

    // Rows of the flattened problem restricted to masked valid texels.
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < model.valid_index.size(); ++i) {
        if (!texel_mask[model.valid_index[i]]) continue;
        rows.push_back(3 * i + 0);
        rows.push_back(3 * i + 1);
        rows.push_back(3 * i + 2);
    }
    if (rows.empty()) throw std::runtime_error("fit_latent_masked: mask selects no valid texels");

    Eigen::VectorXd target_vec = detail::flatten_map(target, model.valid_index);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), K);
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::Index row = static_cast<Eigen::Index>(rows[i]);
        for (int k = 0; k < K; ++k) A(static_cast<Eigen::Index>(i), k) = model.basis(row, k) * model.scales[k];
        r[static_cast<Eigen::Index>(i)] = target_vec[row] - model.mean[row];
    }
    Eigen::MatrixXd normal = A.transpose() * A;
    normal.diagonal().array() += opts.reg;
    Eigen::LDLT<Eigen::MatrixXd> solver(normal);
    bool singular = solver.info() != Eigen::Success;
    if (!singular) {
        double d_max = solver.vectorD().maxCoeff();
        double d_min = solver.vectorD().minCoeff();
        singular = !(d_min > 1e-13 * std::max(d_max, 1e-300));
    }
    if (singular)
        throw std::runtime_error(
            "fit_latent_masked: singular normal matrix (use reg > 0 for rank-deficient masks)");
    Eigen::VectorXd c = solver.solve(A.transpose() * r);

    if (opts.refine_steps > 0) {
        // Subgradient Adam on: mean_masked |A c - r|_1 + face_weight * |F (mu + B diag(sigma) c)|_1
        std::vector<std::size_t> face_rows;
        if (!model.face_mask.empty()) {
            for (std::size_t i = 0; i < model.valid_index.size(); ++i) {
                if (!model.face_mask[model.valid_index[i]]) continue;
                face_rows.push_back(3 * i + 0);
                face_rows.push_back(3 * i + 1);
                face_rows.push_back(3 * i + 2);
            }
        }
        std::vector<double> params(c.data(), c.data() + c.size());
        AdamState adam(params.size(), opts.refine_lr);
        std::vector<double> grads(params.size());
        const double inv_rows = 1.0 / static_cast<double>(rows.size());
        for (int step = 0; step < opts.refine_steps; ++step) {
            Eigen::Map<const Eigen::VectorXd> cv(params.data(),
                                                 static_cast<Eigen::Index>(params.size()));
            Eigen::VectorXd resid = A * cv - r;
            Eigen::VectorXd g = Eigen::VectorXd::Zero(K);
            g += A.transpose() * resid.array().sign().matrix() * inv_rows;
            if (!face_rows.empty() && opts.face_weight > 0.0) {
                for (std::size_t fr : face_rows) {
                    Eigen::Index row = static_cast<Eigen::Index>(fr);
                    double value = model.mean[row];
                    for (int k = 0; k < K; ++k)
                        value += model.basis(row, k) * model.scales[k] * params[static_cast<std::size_t>(k)];
                    double s = value > 0.0 ? 1.0 : (value < 0.0 ? -1.0 : 0.0);
                    for (int k = 0; k < K; ++k)
                        g[k] += opts.face_weight * s * model.basis(row, k) * model.scales[k];
                }
            }
            for (int k = 0; k < K; ++k) grads[static_cast<std::size_t>(k)] = g[k];
            adam_step(adam, params, grads);
        }
        for (int k = 0; k < K; ++k) c[k] = params[static_cast<std::size_t>(k)];
    }

    LatentCode code;
    code.coeffs.assign(c.data(), c.data() + c.size());
    return code;
}

// Memorization check: nearest training map by L2 distance over a texel
// region (by convention the scalp chart, u < 0.5). Ties go to the lowest
// index.
inline std::pair<int, double> nearest_training(const LinearShapeModel& model,
                                               const std::vector<UvMap>& training,
                                               const UvMap& query,
                                               const std::vector<std::uint8_t>* region_mask =
                                                   nullptr) {
    if (training.empty()) throw std::runtime_error("nearest_training: empty training set");
    std::vector<std::uint32_t> region_texels;
    for (std::uint32_t t : model.valid_index) {
        int x = static_cast<int>(t) % model.width;
        bool in_region = region_mask ? (*region_mask)[t] != 0 : 2 * x < model.width - 1;
        if (in_region) region_texels.push_back(t);
    }
    int best = -1;
    double best_d2 = 0.0;
    for (std::size_t s = 0; s < training.size(); ++s) {
        double d2 = 0.0;
        for (std::uint32_t t : region_texels)
            d2 += dist2(training[s].data[t], query.data[t]);
        if (best < 0 || d2 < best_d2) {
            best = static_cast<int>(s);
            best_d2 = d2;
        }
    }
    return {best, std::sqrt(best_d2)};
}

// --- persistence ---
// "HCPC": magic, u32 width/height/K/n_valid, u32 valid indices, u8 face mask
// (full texel grid; all-zero when absent), then mean, scales, basis
// (row-major) as float64. Doubles keep the reloaded basis orthonormal to
// machine precision.

inline void save_model(const std::string& path, const LinearShapeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("HCPC", 4);
    std::uint32_t header[4] = {static_cast<std::uint32_t>(model.width),
                               static_cast<std::uint32_t>(model.height),
                               static_cast<std::uint32_t>(model.components()),
                               static_cast<std::uint32_t>(model.valid_index.size())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(model.valid_index.data()),
              static_cast<std::streamsize>(model.valid_index.size() * 4));
    std::vector<std::uint8_t> face = model.face_mask;
    face.resize(static_cast<std::size_t>(model.width) * model.height, 0);
    out.write(reinterpret_cast<const char*>(face.data()),
              static_cast<std::streamsize>(face.size()));
    out.write(reinterpret_cast<const char*>(model.mean.data()),
              static_cast<std::streamsize>(model.mean.size() * 8));
    out.write(reinterpret_cast<const char*>(model.scales.data()),
              static_cast<std::streamsize>(model.scales.size() * 8));
    // Row-major so the file layout is independent of Eigen's default.
    for (Eigen::Index row = 0; row < model.basis.rows(); ++row)
        for (Eigen::Index k = 0; k < model.basis.cols(); ++k) {
            double v = model.basis(row, k);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline LinearShapeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "HCPC")
        throw std::runtime_error(path + ": not a shape model file");
    std::uint32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    LinearShapeModel model;
    model.width = static_cast<int>(header[0]);
    model.height = static_cast<int>(header[1]);
    const std::uint32_t K = header[2], n_valid = header[3];
    model.valid_index.resize(n_valid);
    in.read(reinterpret_cast<char*>(model.valid_index.data()),
            static_cast<std::streamsize>(n_valid * 4));
    model.face_mask.resize(static_cast<std::size_t>(model.width) * model.height);
    in.read(reinterpret_cast<char*>(model.face_mask.data()),
            static_cast<std::streamsize>(model.face_mask.size()));
    const Eigen::Index dim = 3 * static_cast<Eigen::Index>(n_valid);
    model.mean.resize(dim);
    in.read(reinterpret_cast<char*>(model.mean.data()), static_cast<std::streamsize>(dim * 8));
    model.scales.resize(K);
    in.read(reinterpret_cast<char*>(model.scales.data()), static_cast<std::streamsize>(K * 8));
    model.basis.resize(dim, K);
    for (Eigen::Index row = 0; row < dim; ++row)
        for (std::uint32_t k = 0; k < K; ++k) {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            model.basis(row, static_cast<Eigen::Index>(k)) = v;
        }
    if (!in) throw std::runtime_error(path + ": truncated shape model file");
    return model;
}

}  // namespace headcraft
