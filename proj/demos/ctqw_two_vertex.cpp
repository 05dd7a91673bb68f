// Continuous-time quantum walk on a single edge embedded in G_1 = Z_2 / 2 Z_2.
// Prints the exact occupation densities next to an RK4 run of the same network.

#include <cstdio>

#include <Eigen/Dense>

#include "padicnn/padicnn.hpp"

int main() {
  using namespace padicnn;
  const GroupScheme scheme(2, 1);
  Eigen::MatrixXd edge(2, 2);
  edge << 0, 1, 1, 0;
  const CouplingOperator op = build_graph_operator(edge, scheme);

  StateVector psi0(2);
  psi0 << 1.0, 0.0;
  const NetworkSystem walk(op, NetworkMode::quantum, ZeroCoupling{}, {}, Activation::saturation(), psi0);
  const Trajectory tr = evolve(walk, IntegrationPlan{6.0, 1e-3, 500});
  const FreePropagator exact(op);

  std::printf("%6s %12s %12s %12s %12s\n", "t", "rk4 |psi0|^2", "exact", "rk4 |psi1|^2", "exact");
  for (const auto& snap : tr.snapshots) {
    const Eigen::VectorXd d = density(exact.propagate(psi0, snap.time));
    std::printf("%6.2f %12.9f %12.9f %12.9f %12.9f\n", snap.time, snap.density[0], d[0], snap.density[1], d[1]);
  }
  return 0;
}
