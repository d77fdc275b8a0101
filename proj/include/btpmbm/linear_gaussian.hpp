#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace btpmbm {

/// Mean and covariance of a Gaussian over an N-dimensional state.
template <int N>
struct Gaussian {
    using Vector = Eigen::Matrix<double, N, 1>;
    using Matrix = Eigen::Matrix<double, N, N>;

    Vector mean = Vector::Zero();
    Matrix cov = Matrix::Zero();

    EIGEN_MAKE_ALIGNED_OPERATOR_NEW
};

/// Linear-Gaussian transition x' = F x + w, w ~ N(0, Q), with survival probability.
template <int N>
struct LinearMotion {
    Eigen::Matrix<double, N, N> F = Eigen::Matrix<double, N, N>::Identity();
    Eigen::Matrix<double, N, N> Q = Eigen::Matrix<double, N, N>::Zero();
    double survival = 1.0;
};

/// Axis-aligned rectangle used as the clutter support.
struct Region {
    double x_min = -200.0;
    double x_max = 200.0;
    double y_min = -200.0;
    double y_max = 200.0;

    [[nodiscard]] double area() const { return (x_max - x_min) * (y_max - y_min); }
    [[nodiscard]] bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

/// z = H x + v, v ~ N(0, R), detection probability and uniform Poisson clutter.
template <int N, int M>
struct LinearObservation {
    Eigen::Matrix<double, M, N> H = Eigen::Matrix<double, M, N>::Zero();
    Eigen::Matrix<double, M, M> R = Eigen::Matrix<double, M, M>::Identity();
    double detection = 1.0;
    double clutter_rate = 0.0;
    Region region{};
};

class SingularModelError : public std::runtime_error {
public:
    SingularModelError() : std::runtime_error("singular model") {}
};

template <int N>
[[nodiscard]] Eigen::Matrix<double, N, N> symmetrized(const Eigen::Matrix<double, N, N>& c) {
    return 0.5 * (c + c.transpose());
}

template <int N>
[[nodiscard]] Gaussian<N> kf_predict(const Gaussian<N>& state, const LinearMotion<N>& model) {
    Gaussian<N> out;
    out.mean.noalias() = model.F * state.mean;
    out.cov = symmetrized<N>(model.F * state.cov * model.F.transpose() + model.Q);
    return out;
}

/// Innovation quantities shared by gating, likelihood evaluation and the update.
template <int N, int M>
struct Innovation {
    Eigen::Matrix<double, M, 1> residual;
    Eigen::Matrix<double, M, M> S;
    Eigen::LLT<Eigen::Matrix<double, M, M>> S_llt;
    double mahalanobis2 = 0.0;
    double log_det_S = 0.0;

    [[nodiscard]] double log_likelihood() const {
        return -0.5 * (M * std::log(2.0 * std::numbers::pi) + log_det_S + mahalanobis2);
    }
};

template <int N, int M>
[[nodiscard]] Innovation<N, M> innovation(const Gaussian<N>& state,
                                          const Eigen::Matrix<double, M, 1>& z,
                                          const LinearObservation<N, M>& model) {
    Innovation<N, M> inn;
    inn.residual = z - model.H * state.mean;
    inn.S = symmetrized<M>(model.H * state.cov * model.H.transpose() + model.R);
    inn.S_llt.compute(inn.S);
    if (inn.S_llt.info() != Eigen::Success) throw SingularModelError();
    const auto L = inn.S_llt.matrixL();
    double log_det = 0.0;
    for (int d = 0; d < M; ++d) log_det += 2.0 * std::log(inn.S_llt.matrixLLT()(d, d));
    if (!std::isfinite(log_det)) throw SingularModelError();
    inn.log_det_S = log_det;
    const Eigen::Matrix<double, M, 1> w = L.solve(inn.residual);
    inn.mahalanobis2 = w.squaredNorm();
    return inn;
}

template <int N>
struct KalmanUpdate {
    Gaussian<N> posterior;
    double log_likelihood = 0.0;
};

/// Gaussian conditioning on z; covariance in Joseph form.
template <int N, int M>
[[nodiscard]] Gaussian<N> kf_posterior(const Gaussian<N>& state,
                                       const Innovation<N, M>& inn,
                                       const LinearObservation<N, M>& model) {
    const Eigen::Matrix<double, N, M> PHt = state.cov * model.H.transpose();
    const Eigen::Matrix<double, N, M> K = inn.S_llt.solve(PHt.transpose()).transpose();
    Gaussian<N> out;
    out.mean = state.mean + K * inn.residual;
    const Eigen::Matrix<double, N, N> I_KH =
        Eigen::Matrix<double, N, N>::Identity() - K * model.H;
    out.cov = symmetrized<N>(I_KH * state.cov * I_KH.transpose() + K * model.R * K.transpose());
    return out;
}

template <int N, int M>
[[nodiscard]] KalmanUpdate<N> kf_update(const Gaussian<N>& state,
                                        const Eigen::Matrix<double, M, 1>& z,
                                        const LinearObservation<N, M>& model) {
    const auto inn = innovation(state, z, model);
    return {kf_posterior(state, inn, model), inn.log_likelihood()};
}

/// Rauch-Tung-Striebel backward pass. `predicted[t]` is the one-step prediction
/// made from `filtered[t]`, so predicted.size() == filtered.size() - 1.
template <int N>
[[nodiscard]] std::vector<Gaussian<N>> rts_smooth(std::span<const Gaussian<N>> filtered,
                                                  std::span<const Gaussian<N>> predicted,
                                                  const LinearMotion<N>& model) {
    if (filtered.empty()) throw std::invalid_argument("rts_smooth: empty sequence");
    if (predicted.size() + 1 != filtered.size())
        throw std::invalid_argument("rts_smooth: length mismatch");
    std::vector<Gaussian<N>> smoothed(filtered.begin(), filtered.end());
    for (std::size_t t = filtered.size() - 1; t-- > 0;) {
        const auto& f = filtered[t];
        const auto& p = predicted[t];
        const Eigen::LDLT<Eigen::Matrix<double, N, N>> p_ldlt(p.cov);
        // G = P_f F^T P_p^{-1}
        const Eigen::Matrix<double, N, N> G =
            p_ldlt.solve(model.F * f.cov.transpose()).transpose();
        smoothed[t].mean = f.mean + G * (smoothed[t + 1].mean - p.mean);
        smoothed[t].cov =
            symmetrized<N>(f.cov + G * (smoothed[t + 1].cov - p.cov) * G.transpose());
    }
    return smoothed;
}

/// Chi-square inverse CDF, cached per (probability, degrees of freedom).
[[nodiscard]] double chi2_quantile(double probability, int dof);

/// True iff z lies inside the ellipsoidal gate of the predicted measurement.
template <int N, int M>
[[nodiscard]] bool gate(const Eigen::Matrix<double, M, 1>& z, const Gaussian<N>& predicted_state,
                        const LinearObservation<N, M>& model, double gate_prob) {
    if (!(gate_prob > 0.0 && gate_prob < 1.0))
        throw std::invalid_argument("gate: probability must lie in (0,1)");
    return innovation(predicted_state, z, model).mahalanobis2 <= chi2_quantile(gate_prob, M);
}

// State layout (px, vx, py, vy); measurements are planar positions.
inline constexpr int kStateDim = 4;
inline constexpr int kMeasDim = 2;

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using GaussianMoments = Gaussian<kStateDim>;
using MotionModel = LinearMotion<kStateDim>;
using MeasurementModel = LinearObservation<kStateDim, kMeasDim>;

/// Nearly-constant-velocity model with process noise scale `q`.
[[nodiscard]] MotionModel constant_velocity(double sample_time, double q, double survival);

/// Position-only sensor with identity-scaled noise.
[[nodiscard]] MeasurementModel position_sensor(double noise_var, double detection,
                                               double clutter_rate, Region region);

/// Clutter intensity at z: rate / area inside the region, zero outside.
[[nodiscard]] double clutter_intensity(const MeasurementModel& model, const Vec2& z);

struct BirthComponent {
    double log_weight = 0.0;
    GaussianMoments moments;
};

/// Poisson birth intensity as an unnormalized Gaussian mixture.
struct BirthModel {
    std::vector<BirthComponent> components;
};

/// Motion/sensor constants of the six-object crossing benchmark.
struct ModelPreset {
    MotionModel motion;
    MeasurementModel measurement;
};

[[nodiscard]] ModelPreset benchmark_models();

}  // namespace btpmbm
