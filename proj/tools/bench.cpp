// Kernel benchmark: OpenMP-parallel implementations vs. their serial
// references, with an equality check on the outputs.
#include <chrono>
#include <cstdio>
#include <random>

#include "qpol/conditions.hpp"
#include "qpol/moments.hpp"
#include "qpol/spectral.hpp"

using namespace qpol;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, double max_diff) {
    std::printf("%-24s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   max|diff| %.3g\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
    std::printf("qpol kernel benchmark (serial reference vs OpenMP)\n\n");

    {
        auto grid = SpatialGrid::uniform(4001);
        Spectrum spec = compute_spectrum(grid, make_potential(grid, "linear 5"), 40);
        PotentialFn mu = make_potential(grid, "quadratic 1");

        auto t0 = Clock::now();
        Eigen::MatrixXd ser = reference::coupling_matrix(mu, spec);
        const double t_ser = ms_since(t0);
        t0 = Clock::now();
        Eigen::MatrixXd par = coupling_matrix(mu, spec);
        const double t_par = ms_since(t0);
        report("coupling_matrix", t_ser, t_par, (ser - par).cwiseAbs().maxCoeff());
    }

    {
        // synthetic spectrum large enough to make the O(K^3) scan visible
        auto grid = SpatialGrid::uniform(4001);
        Spectrum spec = compute_spectrum(grid, make_potential(grid, "gauss 25,0.3,0.1"), 220);

        auto t0 = Clock::now();
        C2Result ser = reference::check_C2_bruteforce(spec);
        const double t_ser = ms_since(t0);
        t0 = Clock::now();
        C2Result par = check_C2(spec);
        const double t_par = ms_since(t0);
        const double diff = std::abs(ser.min_gap - par.min_gap) +
                            std::abs(ser.witness.j - par.witness.j) +
                            std::abs(ser.witness.p - par.witness.p) +
                            std::abs(ser.witness.q - par.witness.q);
        report("c2_gap_scan", t_ser, t_par, diff);
    }

    {
        MomentProblem mp;
        mp.T = 2.0;
        const int K = 24;
        mp.frequencies.resize(K - 1);
        for (int k = 2; k <= K; ++k)
            mp.frequencies(k - 2) = (k * k - 1.0) * M_PI * M_PI + 0.01 * k;
        mp.rhs_osc = Eigen::VectorXcd::Zero(K - 1);
        const int n_steps = 1 << 19;

        auto t0 = Clock::now();
        Eigen::MatrixXd ser = reference::moment_matrix(mp, n_steps);
        const double t_ser = ms_since(t0);
        t0 = Clock::now();
        Eigen::MatrixXd par = moment_matrix(mp, n_steps);
        const double t_par = ms_since(t0);
        report("moment_matrix", t_ser, t_par, (ser - par).cwiseAbs().maxCoeff());
    }

    return 0;
}
