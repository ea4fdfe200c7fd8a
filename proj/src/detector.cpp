#include "mmwave/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "mmwave/crb.hpp"
#include "mmwave/fft.hpp"

namespace mmwave {

namespace {

// D_N(d) = sum_{n=0}^{N-1} e^{-j n d}, the closed geometric form with
// the removable singularity handled after reduction to (-pi, pi].
cd dirichlet(int N, double d) {
    d = wrap_pi(d);
    if (std::abs(d) < 1e-12) return cd{static_cast<double>(N), 0.0};
    const double half = 0.5 * d;
    return std::polar(std::sin(N * half) / std::sin(half), -(N - 1) * half);
}

// sum_{n=0}^{N-1} e^{+j n d}
cd geom_sum(int N, double d) { return std::conj(dirichlet(N, d)); }

struct Candidate {
    double wx = 0.0, wy = 0.0;
    std::vector<cd> gains;
    bool passed = false;
};

void fill_steering(std::vector<cd>& ax, double w) {
    for (std::size_t n = 0; n < ax.size(); ++n)
        ax[n] = std::polar(1.0, static_cast<double>(n) * w);
}

// Z += sign * gains_l * a_N(wx) a_M(wy)^T
void add_atom(BasebandCube& Z, const Candidate& c, double sign) {
    const int N = Z.n_fast, M = Z.n_slow, L = Z.n_rx;
    std::vector<cd> ax(N), ay(M);
    fill_steering(ax, c.wx);
    fill_steering(ay, c.wy);
    for (int l = 0; l < L; ++l) {
        const cd gl = sign * c.gains[l];
        cd* s = Z.snapshot(l).data();
        for (int n = 0; n < N; ++n) {
            const cd gx = gl * ax[n];
            cd* row = s + static_cast<std::size_t>(n) * M;
            for (int m = 0; m < M; ++m) row[m] += gx * ay[m];
        }
    }
}

double total_energy(const BasebandCube& Z) {
    double e = 0.0;
    for (const cd& v : Z.data) e += std::norm(v);
    return e;
}

// Weighted inner products of one snapshot against the 2D atom and the
// index-weighted variants needed for first/second derivatives.
struct Moments {
    cd G{}, Gx{}, Gy{}, Gxx{}, Gxy{}, Gyy{};
};

Moments snapshot_moments(std::span<const cd> Z, int N, int M, double wx, double wy,
                         bool second_order) {
    std::vector<cd> cy(M);
    for (int m = 0; m < M; ++m) cy[m] = std::polar(1.0, -m * wy);
    std::vector<cd> t0(N), t1(N), t2(N);
    for (int n = 0; n < N; ++n) {
        const cd* row = Z.data() + static_cast<std::size_t>(n) * M;
        cd s0{}, s1{}, s2{};
        if (second_order) {
            for (int m = 0; m < M; ++m) {
                const cd v = row[m] * cy[m];
                s0 += v;
                s1 += static_cast<double>(m) * v;
                s2 += static_cast<double>(m) * m * v;
            }
        } else {
            for (int m = 0; m < M; ++m) s0 += row[m] * cy[m];
        }
        t0[n] = s0;
        t1[n] = s1;
        t2[n] = s2;
    }
    Moments out;
    for (int n = 0; n < N; ++n) {
        const cd cx = std::polar(1.0, -n * wx);
        out.G += t0[n] * cx;
        if (second_order) {
            const double nd = n;
            out.Gx += cd{0.0, -nd} * t0[n] * cx;
            out.Gy += cd{0.0, -1.0} * t1[n] * cx;
            out.Gxx += -nd * nd * t0[n] * cx;
            out.Gxy += -nd * t1[n] * cx;
            out.Gyy += -t2[n] * cx;
        }
    }
    return out;
}

std::vector<cd> gains_ls_at(const BasebandCube& Z, double wx, double wy) {
    const int N = Z.n_fast, M = Z.n_slow, L = Z.n_rx;
    std::vector<cd> out(L);
    for (int l = 0; l < L; ++l) {
        Moments mo = snapshot_moments(Z.snapshot(l), N, M, wx, wy, false);
        out[l] = mo.G / static_cast<double>(N * M);
    }
    return out;
}

// Joint least-squares re-solve of all gains against the raw frame.
void joint_gains_ls(const BasebandCube& Y, std::vector<Candidate>& cands) {
    const int K = static_cast<int>(cands.size());
    if (K == 0) return;
    const int N = Y.n_fast, M = Y.n_slow, L = Y.n_rx;
    Eigen::MatrixXcd G(K, K);
    for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
            G(a, b) = geom_sum(N, cands[b].wx - cands[a].wx) *
                      geom_sum(M, cands[b].wy - cands[a].wy);
    Eigen::MatrixXcd B(K, L);
    for (int a = 0; a < K; ++a) {
        for (int l = 0; l < L; ++l) {
            Moments mo =
                snapshot_moments(Y.snapshot(l), N, M, cands[a].wx, cands[a].wy, false);
            B(a, l) = mo.G;
        }
    }
    Eigen::MatrixXcd X = G.colPivHouseholderQr().solve(B);
    if (!X.allFinite()) return;  // keep previous gains on a degenerate system
    for (int a = 0; a < K; ++a)
        for (int l = 0; l < L; ++l) cands[a].gains[l] = X(a, l);
}

}  // namespace

void CfarConfig::validate() const {
    if (p_fa <= 0.0 || p_fa >= 1.0)
        throw std::invalid_argument("CfarConfig: p_fa must be in (0, 1)");
    if (train_x < 0 || train_y < 0 || guard_x < 0 || guard_y < 0)
        throw std::invalid_argument("CfarConfig: bands must be nonnegative");
    if (train_x < guard_x || train_y < guard_y)
        throw std::invalid_argument("CfarConfig: training band must enclose guard band");
    if (training_cell_count() < 1)
        throw std::invalid_argument("CfarConfig: no training cells");
    if (K_max < 1 || K_invalid < 1)
        throw std::invalid_argument("CfarConfig: K_max and K_invalid must be >= 1");
    if (oversample < 1) throw std::invalid_argument("CfarConfig: oversample must be >= 1");
}

double cfar_threshold_multiplier(double p_fa_cell, int n_train, int snapshots) {
    if (n_train < 1 || snapshots < 1)
        throw std::invalid_argument("cfar_threshold_multiplier: bad cell counts");
    if (p_fa_cell <= 0.0 || p_fa_cell >= 1.0)
        throw std::invalid_argument("cfar_threshold_multiplier: p_fa must be in (0, 1)");
    // With U ~ chi2(2L) the CUT and V ~ chi2(2 L n_t) the pooled training
    // sum, P_FA = P(U/V > alpha/n_t) = Ibar_x(L, L n_t) at x = alpha/(n_t+alpha).
    // Invert the regularized incomplete beta for x, then recover alpha.
    const double a = static_cast<double>(snapshots);
    const double b = static_cast<double>(snapshots) * n_train;
    double x = 0.0;
    try {
        x = boost::math::ibetac_inv(a, b, p_fa_cell);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("cfar_threshold_multiplier: ") + e.what());
    }
    if (!(x > 0.0 && x < 1.0))
        throw std::runtime_error("cfar_threshold_multiplier: inversion out of range");
    return n_train * x / (1.0 - x);
}

SpectrumSet compute_spectra(const BasebandCube& cube, int oversample) {
    if (oversample < 1) throw std::invalid_argument("compute_spectra: oversample < 1");
    SpectrumSet out;
    out.n_fast = cube.n_fast;
    out.n_slow = cube.n_slow;
    out.oversample = oversample;
    Fft2D fft(out.grid_rows(), out.grid_cols());
    out.F.resize(cube.n_rx);
    for (int l = 0; l < cube.n_rx; ++l) {
        out.F[l].resize(static_cast<std::size_t>(out.grid_rows()) * out.grid_cols());
        fft.forward_padded(cube.snapshot(l), cube.n_fast, cube.n_slow, out.F[l].data());
    }
    return out;
}

std::vector<std::vector<cd>> residue_spectrum(
    const SpectrumSet& spectra, std::span<const SinusoidEstimate> detections) {
    const int oN = spectra.grid_rows(), oM = spectra.grid_cols();
    const int N = spectra.n_fast, M = spectra.n_slow;
    std::vector<std::vector<cd>> out = spectra.F;

    const std::size_t K = detections.size();
    std::vector<std::vector<cd>> dx(K), dy(K);
    for (std::size_t k = 0; k < K; ++k) {
        dx[k].resize(oN);
        dy[k].resize(oM);
        for (int i = 0; i < oN; ++i)
            dx[k][i] = dirichlet(N, 2.0 * kPi * i / oN - detections[k].wx);
        for (int j = 0; j < oM; ++j)
            dy[k][j] = dirichlet(M, 2.0 * kPi * j / oM - detections[k].wy);
    }
    for (std::size_t l = 0; l < out.size(); ++l) {
        for (int i = 0; i < oN; ++i) {
            cd* row = out[l].data() + static_cast<std::size_t>(i) * oM;
            for (std::size_t k = 0; k < K; ++k) {
                const cd c = detections[k].gains[l] * dx[k][i];
                const cd* dyk = dy[k].data();
                for (int j = 0; j < oM; ++j) row[j] -= c * dyk[j];
            }
        }
    }
    return out;
}

double mnomp_objective(const BasebandCube& Z, double wx, double wy) {
    const int NM = Z.n_fast * Z.n_slow;
    double S = 0.0;
    for (int l = 0; l < Z.n_rx; ++l) {
        Moments mo = snapshot_moments(Z.snapshot(l), Z.n_fast, Z.n_slow, wx, wy, false);
        S += std::norm(mo.G);
    }
    return S / NM;
}

void mnomp_objective_derivs(const BasebandCube& Z, double wx, double wy,
                            Eigen::Vector2d& grad, Eigen::Matrix2d& hess) {
    const double NM = Z.n_fast * Z.n_slow;
    grad.setZero();
    hess.setZero();
    for (int l = 0; l < Z.n_rx; ++l) {
        Moments mo = snapshot_moments(Z.snapshot(l), Z.n_fast, Z.n_slow, wx, wy, true);
        grad[0] += 2.0 * std::real(std::conj(mo.G) * mo.Gx);
        grad[1] += 2.0 * std::real(std::conj(mo.G) * mo.Gy);
        hess(0, 0) += 2.0 * std::real(std::conj(mo.G) * mo.Gxx + std::conj(mo.Gx) * mo.Gx);
        hess(0, 1) += 2.0 * std::real(std::conj(mo.G) * mo.Gxy + std::conj(mo.Gx) * mo.Gy);
        hess(1, 1) += 2.0 * std::real(std::conj(mo.G) * mo.Gyy + std::conj(mo.Gy) * mo.Gy);
    }
    grad /= NM;
    hess(0, 0) /= NM;
    hess(0, 1) /= NM;
    hess(1, 0) = hess(0, 1);
    hess(1, 1) /= NM;
}

RefineResult newton_refine_2d(const BasebandCube& Z, double wx, double wy) {
    RefineResult out;
    out.wx = wx;
    out.wy = wy;
    Eigen::Vector2d g;
    Eigen::Matrix2d H;
    mnomp_objective_derivs(Z, wx, wy, g, H);
    const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
    if (std::abs(det) > 1e-300 && std::isfinite(det)) {
        const double S0 = mnomp_objective(Z, wx, wy);
        Eigen::Vector2d step = -H.inverse() * g;
        double t = 1.0;
        for (int half = 0; half < 10; ++half, t *= 0.5) {
            const double nwx = wx + t * step[0];
            const double nwy = wy + t * step[1];
            if (mnomp_objective(Z, nwx, nwy) > S0) {
                out.wx = nwx;
                out.wy = nwy;
                break;
            }
        }
    }
    out.gains = gains_ls_at(Z, out.wx, out.wy);
    return out;
}

// ---------------------------------------------------------------------------

struct MnompDetector::Impl {
    RadarParams params;
    CfarConfig cfg;
    RadarLimits lim;
    int N, M, L, oN, oM;
    double alpha_mnomp_ = 0.0;
    double alpha_fft_ = 0.0;
    Fft2D fft_os;
    Fft2D fft_crit;

    std::vector<std::vector<cd>> F;  // per-snapshot oversampled spectra
    std::vector<double> power;       // residue power, oN x oM

    Impl(const RadarParams& p, const CfarConfig& c)
        : params(p), cfg(c), lim(compute_limits(p)), N(p.n_fast), M(p.n_slow),
          L(p.n_rx), oN(c.oversample * N), oM(c.oversample * M),
          fft_os(oN, oM), fft_crit(N, M) {
        cfg.validate();
        const int n_train = cfg.training_cell_count();
        // The greedy search effectively tests the whole oversampled grid;
        // the baseline tests exactly the N*M bins.
        alpha_mnomp_ = cfar_threshold_multiplier(
            cfg.p_fa / (static_cast<double>(N) * M * cfg.oversample * cfg.oversample),
            n_train, L);
        alpha_fft_ =
            cfar_threshold_multiplier(cfg.p_fa / (static_cast<double>(N) * M), n_train, L);
        F.resize(L);
        power.resize(static_cast<std::size_t>(oN) * oM);
    }

    void check_shape(const BasebandCube& cube) const {
        if (cube.n_fast != N || cube.n_slow != M || cube.n_rx != L)
            throw std::invalid_argument("detector: cube shape does not match RadarParams");
    }

    // Residue power on the oversampled grid, sum over snapshots, via the
    // Dirichlet-kernel subtraction from the cached raw spectra.
    void build_power(const std::vector<Candidate>& cands) {
        const std::size_t K = cands.size();
        std::vector<std::vector<cd>> dx(K), dy(K);
        for (std::size_t k = 0; k < K; ++k) {
            dx[k].resize(oN);
            dy[k].resize(oM);
            for (int i = 0; i < oN; ++i)
                dx[k][i] = dirichlet(N, 2.0 * kPi * i / oN - cands[k].wx);
            for (int j = 0; j < oM; ++j)
                dy[k][j] = dirichlet(M, 2.0 * kPi * j / oM - cands[k].wy);
        }
        std::fill(power.begin(), power.end(), 0.0);
        std::vector<cd> row(oM);
        for (int l = 0; l < L; ++l) {
            for (int i = 0; i < oN; ++i) {
                const cd* src = F[l].data() + static_cast<std::size_t>(i) * oM;
                std::copy(src, src + oM, row.begin());
                for (std::size_t k = 0; k < K; ++k) {
                    const cd c = cands[k].gains[l] * dx[k][i];
                    const cd* dyk = dy[k].data();
                    for (int j = 0; j < oM; ++j) row[j] -= c * dyk[j];
                }
                double* pw = power.data() + static_cast<std::size_t>(i) * oM;
                for (int j = 0; j < oM; ++j) pw[j] += std::norm(row[j]);
            }
        }
    }

    // Mean training-cell statistic around critical bin (ci, cj), taken on
    // the critically sampled residue grid with toroidal wrap.
    double training_mean(int ci, int cj) const {
        const int os = cfg.oversample;
        double tot = 0.0;
        int cnt = 0;
        for (int di = -cfg.train_x; di <= cfg.train_x; ++di) {
            for (int dj = -cfg.train_y; dj <= cfg.train_y; ++dj) {
                if (std::abs(di) <= cfg.guard_x && std::abs(dj) <= cfg.guard_y) continue;
                const int a = ((ci + di) % N + N) % N;
                const int b = ((cj + dj) % M + M) % M;
                tot += power[(static_cast<std::size_t>(a) * os) * oM +
                             static_cast<std::size_t>(b) * os];
                ++cnt;
            }
        }
        return tot / (cnt * static_cast<double>(N) * M);
    }

    bool cfar_test(BasebandCube& Yr, Candidate& c, double alpha) {
        add_atom(Yr, c, +1.0);
        const double T = mnomp_objective(Yr, c.wx, c.wy);
        add_atom(Yr, c, -1.0);
        const int ci = static_cast<int>(std::lround(wrap_two_pi(c.wx) / (2.0 * kPi / N))) % N;
        const int cj = static_cast<int>(std::lround(wrap_two_pi(c.wy) / (2.0 * kPi / M))) % M;
        return T > alpha * training_mean(ci, cj);
    }

    Detection finalize(const Candidate& c, double sigma2_hat) const {
        Detection d;
        d.omega[0] = wrap_two_pi(c.wx);
        d.omega[1] = wrap_two_pi(c.wy);
        d.gains = c.gains;
        if (L >= 2) {
            auto [wz, gamma] = azimuth_ls(c.gains);
            d.omega[2] = wz;
            d.gamma = gamma;
        } else {
            d.omega[2] = 0.0;
            d.gamma = c.gains[0];
        }
        const PolarState st = freq_to_state(d.omega, lim);
        d.r = st.r;
        d.v = st.v;
        d.theta = st.theta;
        d.snr_db = 10.0 * std::log10(std::max(
                              1e-300, static_cast<double>(N) * M * std::norm(d.gamma) /
                                          std::max(sigma2_hat, 1e-300)));
        d.passed_threshold = c.passed;
        return d;
    }

    DetectionResult detect(const BasebandCube& cube) {
        check_shape(cube);
        for (int l = 0; l < L; ++l) {
            F[l].resize(static_cast<std::size_t>(oN) * oM);
            fft_os.forward_padded(cube.snapshot(l), N, M, F[l].data());
        }
        const double alpha = cfg.alpha.value_or(alpha_mnomp_);
        BasebandCube Yr = cube;  // time-domain residue, all candidates removed
        std::vector<Candidate> cands;
        DetectionResult result;

        build_power(cands);
        const int iter_budget = cfg.K_max + cfg.K_invalid + 8;
        for (int iter = 0; iter < iter_budget; ++iter) {
            // 1. strongest residue cell on the oversampled grid
            const std::size_t arg =
                std::distance(power.begin(), std::max_element(power.begin(), power.end()));
            Candidate cand;
            cand.wx = 2.0 * kPi * (arg / oM) / oN;
            cand.wy = 2.0 * kPi * (arg % oM) / oM;
            // 2a. single-frequency refinement against the current residue
            for (int s = 0; s < 3; ++s) {
                RefineResult r = newton_refine_2d(Yr, cand.wx, cand.wy);
                cand.wx = r.wx;
                cand.wy = r.wy;
                cand.gains = std::move(r.gains);
            }
            add_atom(Yr, cand, -1.0);
            cands.push_back(std::move(cand));
            // 2b. cyclic refinement over all candidates + joint gain re-solve
            for (int pass = 0; pass < 6; ++pass) {
                double moved = 0.0;
                for (Candidate& q : cands) {
                    add_atom(Yr, q, +1.0);
                    RefineResult r = newton_refine_2d(Yr, q.wx, q.wy);
                    moved = std::max({moved, std::abs(r.wx - q.wx), std::abs(r.wy - q.wy)});
                    q.wx = r.wx;
                    q.wy = r.wy;
                    q.gains = std::move(r.gains);
                    add_atom(Yr, q, -1.0);
                }
                joint_gains_ls(cube, cands);
                Yr = cube;
                for (const Candidate& q : cands) add_atom(Yr, q, -1.0);
                if (moved < 1e-7) break;
            }
            result.residual_trace.push_back(total_energy(Yr));
            // 3. CFAR: test the new candidate and re-test the trailing
            //    failed run before it (a late pass revalidates the run)
            build_power(cands);
            std::size_t first = cands.size() - 1;
            while (first > 0 && !cands[first - 1].passed) --first;
            for (std::size_t q = first; q < cands.size(); ++q)
                cands[q].passed = cfar_test(Yr, cands[q], alpha);
            // 4. stop on K_invalid consecutive failures or K_max
            int tail = 0;
            for (auto it = cands.rbegin(); it != cands.rend() && !it->passed; ++it) ++tail;
            if (tail >= cfg.K_invalid || static_cast<int>(cands.size()) >= cfg.K_max)
                break;
        }
        // drop the trailing failed run; what remains is the detection set
        while (!cands.empty() && !cands.back().passed) {
            add_atom(Yr, cands.back(), +1.0);
            cands.pop_back();
        }
        result.sigma2_hat = total_energy(Yr) / (static_cast<double>(N) * M * L);
        result.detections.reserve(cands.size());
        for (const Candidate& c : cands)
            result.detections.push_back(finalize(c, result.sigma2_hat));
        return result;
    }

    DetectionResult detect_fft_cfar(const BasebandCube& cube) {
        check_shape(cube);
        std::vector<std::vector<cd>> Fc(L);
        for (int l = 0; l < L; ++l) {
            Fc[l].resize(static_cast<std::size_t>(N) * M);
            fft_crit.forward(cube.snapshot(l).data(), Fc[l].data());
        }
        std::vector<double> P(static_cast<std::size_t>(N) * M, 0.0);
        for (int l = 0; l < L; ++l)
            for (std::size_t i = 0; i < P.size(); ++i) P[i] += std::norm(Fc[l][i]);
        const double nm = static_cast<double>(N) * M;
        for (double& v : P) v /= nm;

        DetectionResult result;
        result.sigma2_hat = std::accumulate(P.begin(), P.end(), 0.0) / (P.size() * L);
        const double alpha = cfg.alpha.value_or(alpha_fft_);

        auto at = [&](int i, int j) {
            return P[static_cast<std::size_t>(((i % N) + N) % N) * M + (((j % M) + M) % M)];
        };
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < M; ++j) {
                const double p = at(i, j);
                bool is_peak = p > 0.0;
                for (int di = -1; di <= 1 && is_peak; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        if (di == 0 && dj == 0) continue;
                        if (at(i + di, j + dj) >= p) {
                            is_peak = false;
                            break;
                        }
                    }
                if (!is_peak) continue;
                double tot = 0.0;
                int cnt = 0;
                for (int di = -cfg.train_x; di <= cfg.train_x; ++di)
                    for (int dj = -cfg.train_y; dj <= cfg.train_y; ++dj) {
                        if (std::abs(di) <= cfg.guard_x && std::abs(dj) <= cfg.guard_y)
                            continue;
                        tot += at(i + di, j + dj);
                        ++cnt;
                    }
                if (p <= alpha * tot / cnt) continue;
                Candidate c;
                c.wx = 2.0 * kPi * i / N;
                c.wy = 2.0 * kPi * j / M;
                c.gains.resize(L);
                for (int l = 0; l < L; ++l)
                    c.gains[l] = Fc[l][static_cast<std::size_t>(i) * M + j] / nm;
                c.passed = true;
                result.detections.push_back(finalize(c, result.sigma2_hat));
            }
        }
        return result;
    }
};

MnompDetector::MnompDetector(const RadarParams& params, const CfarConfig& cfg)
    : impl_(std::make_unique<Impl>(params, cfg)) {}
MnompDetector::~MnompDetector() = default;
MnompDetector::MnompDetector(MnompDetector&&) noexcept = default;
MnompDetector& MnompDetector::operator=(MnompDetector&&) noexcept = default;

DetectionResult MnompDetector::detect(const BasebandCube& cube) {
    return impl_->detect(cube);
}
DetectionResult MnompDetector::detect_fft_cfar(const BasebandCube& cube) {
    return impl_->detect_fft_cfar(cube);
}
const RadarParams& MnompDetector::params() const { return impl_->params; }
const RadarLimits& MnompDetector::limits() const { return impl_->lim; }
double MnompDetector::alpha_mnomp() const { return impl_->alpha_mnomp_; }
double MnompDetector::alpha_fft() const { return impl_->alpha_fft_; }

DetectionResult mnomp_detect(const BasebandCube& cube, const RadarParams& params,
                             const CfarConfig& cfg) {
    return MnompDetector(params, cfg).detect(cube);
}
DetectionResult fft_cfar_detect(const BasebandCube& cube, const RadarParams& params,
                                const CfarConfig& cfg) {
    return MnompDetector(params, cfg).detect_fft_cfar(cube);
}

std::pair<double, cd> azimuth_ls(std::span<const cd> gains) {
    const int L = static_cast<int>(gains.size());
    if (L < 2) throw std::invalid_argument("azimuth_ls: need at least two antennas");

    auto corr = [&](double w) {
        cd G{};
        for (int l = 0; l < L; ++l) G += gains[l] * std::polar(1.0, -l * w);
        return G;
    };
    const int grid = std::max(64, 32 * L);
    double best_w = 0.0;
    double best_p = -1.0;
    for (int g = 0; g < grid; ++g) {
        const double w = 2.0 * kPi * g / grid;
        const double p = std::norm(corr(w));
        if (p > best_p) {
            best_p = p;
            best_w = w;
        }
    }
    double w = best_w;
    for (int it = 0; it < 20; ++it) {
        cd G{}, Gz{}, Gzz{};
        for (int l = 0; l < L; ++l) {
            const cd e = gains[l] * std::polar(1.0, -l * w);
            G += e;
            Gz += cd{0.0, -static_cast<double>(l)} * e;
            Gzz += -static_cast<double>(l) * l * e;
        }
        const double d1 = 2.0 * std::real(std::conj(G) * Gz);
        const double d2 = 2.0 * std::real(std::conj(G) * Gzz + std::conj(Gz) * Gz);
        if (std::abs(d2) < 1e-300) break;
        const double step = -d1 / d2;
        if (!(d2 < 0.0)) break;  // not at a local max curvature; keep grid value
        const double S0 = std::norm(G);
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 10; ++half, t *= 0.5) {
            if (std::norm(corr(w + t * step)) > S0) {
                w += t * step;
                accepted = true;
                break;
            }
        }
        if (!accepted || std::abs(t * step) < 1e-13) break;
    }
    w = wrap_pi(w);
    const cd gamma = corr(w) / static_cast<double>(L);
    return {w, gamma};
}

PolarState freq_to_state(const Eigen::Vector3d& omega, const RadarLimits& lim) {
    if (std::abs(omega[2]) > kPi + 1e-12)
        throw std::invalid_argument("freq_to_state: |omega_z| > pi");
    PolarState st;
    st.r = wrap_two_pi(omega[0]) * lim.r_max / (2.0 * kPi);
    st.v = wrap_pi(omega[1]) * lim.v_max / kPi;
    st.theta = std::asin(std::clamp(omega[2] / kPi, -1.0, 1.0));
    return st;
}

Measurement to_pseudo_measurement(const Detection& det, const RadarParams& params,
                                  double sigma2_hat, double kappa) {
    const RadarLimits lim = compute_limits(params);
    Measurement m;
    m.z = {det.r * std::sin(det.theta), det.r * std::cos(det.theta)};
    m.v_r = det.v;
    m.theta = det.theta;
    m.r = det.r;
    m.snr_db = det.snr_db;

    double theta = det.theta;
    const double limit = kPi / 2.0 - 1e-6;
    if (std::abs(theta) > limit) {
        theta = std::copysign(limit, theta);
        m.theta_clamped = true;
    }
    SignalPoint sp;
    sp.omega = det.omega;
    sp.g = std::abs(det.gamma);
    sp.sigma2 = sigma2_hat;
    sp.n_fast = params.n_fast;
    sp.n_slow = params.n_slow;
    sp.n_rx = params.n_rx;
    m.R = kappa * crb_pxpy(sp, lim, det.r, theta);
    const double M = params.n_slow;
    m.var_v = kappa * (lim.v_max / kPi) * (lim.v_max / kPi) * 6.0 * sigma2_hat /
              (params.n_fast * M * params.n_rx * sp.g * sp.g * (M * M - 1.0));
    return m;
}

std::vector<Measurement> cluster_measurements(const std::vector<Measurement>& meas,
                                              double d_pos, double d_vel) {
    const std::size_t n = meas.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if ((meas[i].z - meas[j].z).norm() <= d_pos &&
                std::abs(meas[i].v_r - meas[j].v_r) <= d_vel)
                parent[find(i)] = find(j);
        }
    std::vector<Measurement> out;
    std::vector<bool> done(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        if (done[root]) continue;
        done[root] = true;
        Measurement rep;
        rep.z.setZero();
        rep.R.setZero();
        int cnt = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (find(j) != root) continue;
            rep.z += meas[j].z;
            rep.R += meas[j].R;
            rep.v_r += meas[j].v_r;
            rep.var_v += meas[j].var_v;
            rep.snr_db += meas[j].snr_db;
            rep.theta_clamped = rep.theta_clamped || meas[j].theta_clamped;
            rep.frame = meas[j].frame;
            ++cnt;
        }
        rep.z /= cnt;
        rep.R /= cnt;
        rep.v_r /= cnt;
        rep.var_v /= cnt;
        rep.snr_db /= cnt;
        rep.r = rep.z.norm();
        rep.theta = std::atan2(rep.z[0], rep.z[1]);
        out.push_back(rep);
    }
    return out;
}

}  // namespace mmwave
