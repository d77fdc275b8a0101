#include "btpmbm/linear_gaussian.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <map>
#include <mutex>
#include <utility>

namespace btpmbm {

double chi2_quantile(double probability, int dof) {
    static std::mutex mutex;
    static std::map<std::pair<double, int>, double> cache;
    const std::lock_guard lock(mutex);
    const auto key = std::make_pair(probability, dof);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const boost::math::chi_squared dist(dof);
    const double q = boost::math::quantile(dist, probability);
    cache.emplace(key, q);
    return q;
}

MotionModel constant_velocity(double sample_time, double q, double survival) {
    MotionModel m;
    Eigen::Matrix2d block;
    block << 1.0, sample_time, 0.0, 1.0;
    Eigen::Matrix2d noise;
    const double ts = sample_time;
    noise << ts * ts * ts / 2.0, ts * ts / 2.0, ts * ts / 2.0, ts;
    m.F.setZero();
    m.Q.setZero();
    m.F.block<2, 2>(0, 0) = block;
    m.F.block<2, 2>(2, 2) = block;
    m.Q.block<2, 2>(0, 0) = q * noise;
    m.Q.block<2, 2>(2, 2) = q * noise;
    m.survival = survival;
    return m;
}

MeasurementModel position_sensor(double noise_var, double detection, double clutter_rate,
                                 Region region) {
    MeasurementModel m;
    m.H.setZero();
    m.H(0, 0) = 1.0;
    m.H(1, 2) = 1.0;
    m.R = noise_var * Eigen::Matrix2d::Identity();
    m.detection = detection;
    m.clutter_rate = clutter_rate;
    m.region = region;
    return m;
}

double clutter_intensity(const MeasurementModel& model, const Vec2& z) {
    if (!model.region.contains(z.x(), z.y())) return 0.0;
    return model.clutter_rate / model.region.area();
}

ModelPreset benchmark_models() {
    return {constant_velocity(1.0, 0.09, 0.98),
            position_sensor(1.0, 0.7, 30.0, Region{-200.0, 200.0, -200.0, 200.0})};
}

}  // namespace btpmbm
