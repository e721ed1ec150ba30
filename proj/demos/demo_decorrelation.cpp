// Shows what subspace removal does to a clustered design's geometry: the
// worst off-diagonal Gram entry collapses and the top of the spectrum drops
// back to the level of a design with uniformly spread columns.

#include <algorithm>
#include <cstdio>

#include "cra/cra.hpp"

namespace {

double max_offdiag(const cra::Matrix& g) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j)
            if (i != j)
                m = std::max(m, std::abs(g(i, j)));
    return m;
}

}  // namespace

int main() {
    const int n = 64;
    const int p = 200;
    const int q = 4;

    const cra::Rng base(21);
    cra::CapEnsembleSpec spec;
    for (int j = 0; j < q; ++j) {
        cra::Rng center_rng = base.derive({0xceULL, static_cast<std::uint64_t>(j)});
        spec.caps.push_back({cra::uniform_sphere(n, center_rng), 0.8});
    }
    spec.assignment = cra::round_robin_assignment(q, p);
    const cra::Matrix x = cra::generate_cap_matrix(spec, base.derive({1})).first;

    const cra::ClusterModel cluster = cra::top_subspace(x, q);
    const cra::CraTransform transform = cra::build_transform(x, cluster);

    cra::Matrix reference(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        cra::Rng stream = base.derive({2, static_cast<std::uint64_t>(j)});
        reference.col(j) = cra::uniform_sphere(n, stream);
    }

    std::printf("design: %d x %d, %d caps of cosine 0.8\n\n", n, p, q);
    std::printf("worst off-diagonal Gram entry\n");
    std::printf("  raw columns:          %.4f\n", max_offdiag(x.transpose() * x));
    std::printf("  after removal:        %.4f\n",
                max_offdiag(transform.x_tilde.transpose() * transform.x_tilde));
    std::printf("  uniform reference:    %.4f\n\n",
                max_offdiag(reference.transpose() * reference));

    const auto spectrum = cra::spectrum_report(x, transform.x_tilde, reference);
    auto top = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end());
    };
    std::printf("largest singular value\n");
    std::printf("  raw columns:          %.3f\n", top(spectrum.x));
    std::printf("  after removal:        %.3f\n", top(spectrum.x_tilde));
    std::printf("  uniform reference:    %.3f\n", top(spectrum.reference));

    if (!transform.dropped_columns.empty())
        std::printf("\n%zu columns sat inside the removed subspace and were dropped\n",
                    transform.dropped_columns.size());
    return 0;
}
