#pragma once

// Eulerian run with particles tracked alongside it. The velocity snapshots of
// the run drive the particles; at the end the Lagrangian stress is compared
// with the Eulerian stress evaluated at the particle positions.

#include "lagrangian.hpp"
#include "oldroyd2d.hpp"

#include <algorithm>
#include <cmath>

namespace oldrlab {

struct TrackingConfig {
    int particles_per_side = 16;
    /// Particle step in solver steps; even, so RK4 half stages land on stored snapshots.
    int substeps = 4;
    /// Relative coefficient cutoff for off-grid velocity evaluation.
    double prune_rel = 1e-14;

    void validate() const {
        if (particles_per_side < 1) throw ConfigError("tracking: particles_per_side must be >= 1");
        if (substeps < 2 || substeps % 2 != 0) throw ConfigError("tracking: substeps must be even and >= 2");
        if (!(prune_rel >= 0.0 && prune_rel < 1.0)) throw ConfigError("tracking: prune_rel must lie in [0, 1)");
    }
};

struct TrackingResult {
    RunResult run;
    ParticleSet particles;
    std::vector<Mat2> lagrangian;
    std::vector<Mat2> eulerian;
    /// max_p |sigma_E - sigma_L| / max_p |sigma_L|, entrywise maxima.
    double relative_error = 0.0;
    double absolute_error = 0.0;
};

inline TrackingResult run_tracked(const OldroydState& state0, const ModelParams& p, const SolverConfig& cfg,
                                  const TrackingConfig& tc) {
    tc.validate();
    if (state0.relaxationless()) throw ConfigError("run_tracked: relaxational states only");
    const long nsteps = std::lround(cfg.t_end / cfg.dt);
    if (nsteps % tc.substeps != 0)
        throw ConfigError("run_tracked: step count must be a multiple of substeps");

    // The run dealiases its initial state; labels carry that state.
    const OldroydState s0 = cfg.dealias ? dealiased(state0) : state0;
    TrackingResult out;
    out.particles = ParticleSet::lattice(tc.particles_per_side, p.kappa0());
    out.particles.time = s0.time;
    const auto rho0 = density_at_particles(out.particles, s0.rho);
    const auto sigma0 = stress_at_labels(out.particles, s0.a, s0.b, s0.c);

    SnapshotSampler sampler(tc.prune_rel);
    const int half = tc.substeps / 2;
    const double pdt = tc.substeps * cfg.dt;
    long count = 0;
    out.run = run(state0, p, cfg, [&](const OldroydState& s, const Kinematics& kin) {
        if (count % half == 0) sampler.add(s.time, kin.u);
        if (count > 0 && count % tc.substeps == 0) {
            out.particles = advance_particles(out.particles, sampler, pdt);
            sampler.prune_before(s.time - pdt);
        }
        ++count;
    });
    if (out.run.blowup) throw InternalError("run_tracked: Eulerian run blew up: " + out.run.reason);

    out.lagrangian = stress_reconstruct(out.particles, rho0, sigma0);
    const auto& f = out.run.final_state;
    const PointEvaluator ev(std::vector<SpectralField>{f.a, f.b, f.c});
    double scale = 0.0;
    for (std::size_t i = 0; i < out.particles.particles.size(); ++i) {
        const auto v = ev.values(out.particles.particles[i].X);
        const Mat2 e = Mat2::of(0.5 * v[2] + v[0], v[1], v[1], 0.5 * v[2] - v[0]);
        out.eulerian.push_back(e);
        out.absolute_error = std::max(out.absolute_error, (e - out.lagrangian[i]).max_abs());
        scale = std::max(scale, out.lagrangian[i].max_abs());
    }
    out.relative_error = scale > 0.0 ? out.absolute_error / scale : out.absolute_error;
    return out;
}

}  // namespace oldrlab
