// Computes Z(E, eta) for one spectrum by every available route and applies
// the Schwinger-Dyson operator to the quadrature-backed Z.
#include <cstdio>

#include "phi4mm/phi4mm.hpp"

int main() {
  using namespace phi4mm;
  const Spectrum s({1.0, 2.0}, 0.5);
  const auto grid = GridSettings{}.for_spectrum(s);
  McConfig mc;
  mc.samples = 200000;

  std::printf("free (eta=0)      %.10f\n", z_free(s.with_eta(0.0)));
  for (const auto& z : {z_eigen_quadrature(s, grid), z_pfaffian(s, grid), z_matrix_mc(s, mc)})
    std::printf("%-17s %.10f +- %.2e\n", to_string(z.route).c_str(), z.value, z.error);

  const auto zq = eigen_quadrature_function(grid);
  const auto stencil = OperatorStencil::for_spectrum(s, 4, 2);
  const auto lsd = apply_lsd(*zq, s, stencil);
  std::printf("L_SD Z / (N^2 Z)  %.3e\n", lsd.value / sd_normalization(s, zq->evaluate(s).value));

  const auto psi = psi_transform(zq);
  const auto hho = apply_hho(*psi, s, stencil);
  std::printf("H_HO Psi / norm   %.3e\n", hho.value / ho_normalization(s, psi->evaluate(s).value));
}
