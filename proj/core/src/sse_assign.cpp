#include "prime/sse_assign.hpp"

#include <algorithm>
#include <cmath>

namespace prime {
namespace {

// Partial charges (0.42e, 0.20e) times the unit conversion factor 332.
constexpr double kCoupling = 0.084 * 332.0;
constexpr double kMinimalDistance = 0.5;
constexpr double kMinimalEnergy = -9.9;
constexpr double kAmideBond = 1.01;

const Vec3& atom_at(const ProteinStructure& s, const std::optional<int>& idx) {
  return s.atoms[static_cast<std::size_t>(*idx)].coords;
}

bool continuous(const ProteinStructure& s, int prev, int next, double max_ca) {
  const Residue& a = s.residues[static_cast<std::size_t>(prev)];
  const Residue& b = s.residues[static_cast<std::size_t>(next)];
  if (a.chain_id != b.chain_id || !a.ca_idx || !b.ca_idx) return false;
  return (atom_at(s, a.ca_idx) - atom_at(s, b.ca_idx)).norm() <= max_ca;
}

}  // namespace

char to_char(SseLabel label) {
  switch (label) {
    case SseLabel::H: return 'H';
    case SseLabel::E: return 'E';
    case SseLabel::L: return 'L';
  }
  return 'L';
}

std::optional<Vec3> amide_hydrogen(const ProteinStructure& s, int residue) {
  if (residue <= 0 || residue >= static_cast<int>(s.residues.size())) return std::nullopt;
  const Residue& r = s.residues[static_cast<std::size_t>(residue)];
  const Residue& prev = s.residues[static_cast<std::size_t>(residue - 1)];
  if (r.aa == AminoAcid::PRO || !r.n_idx || !prev.c_idx || !prev.o_idx) return std::nullopt;
  if (!continuous(s, residue - 1, residue, 4.5)) return std::nullopt;
  const Vec3& n = atom_at(s, r.n_idx);
  const Vec3 mid = 0.5 * (atom_at(s, prev.c_idx) + atom_at(s, prev.o_idx));
  return Vec3(n + (n - mid).normalized() * kAmideBond);
}

double hbond_energy(const ProteinStructure& s, int donor, int acceptor) {
  const auto& d = s.residues.at(static_cast<std::size_t>(donor));
  const auto& a = s.residues.at(static_cast<std::size_t>(acceptor));
  if (!d.has_full_backbone() || !a.has_full_backbone()) {
    throw Error(ErrorCode::MissingBackbone, "residue " + std::to_string(d.has_full_backbone() ? acceptor : donor) +
                                                " lacks N/CA/C/O");
  }
  if (donor == acceptor) return kNoBond;
  const auto h = amide_hydrogen(s, donor);
  if (!h) return kNoBond;

  const Vec3& n = atom_at(s, d.n_idx);
  const Vec3& c = atom_at(s, a.c_idx);
  const Vec3& o = atom_at(s, a.o_idx);
  const double r_on = (o - n).norm();
  const double r_ch = (c - *h).norm();
  const double r_oh = (o - *h).norm();
  const double r_cn = (c - n).norm();
  if (std::min({r_on, r_ch, r_oh, r_cn}) < kMinimalDistance) return kMinimalEnergy;
  return kCoupling * (1.0 / r_on + 1.0 / r_ch - 1.0 / r_oh - 1.0 / r_cn);
}

std::vector<bool> chain_breaks(const ProteinStructure& s, double max_ca_distance) {
  const int n = static_cast<int>(s.residues.size());
  std::vector<bool> breaks(static_cast<std::size_t>(std::max(n, 1)), false);
  for (int i = 0; i + 1 < n; ++i) breaks[static_cast<std::size_t>(i)] = !continuous(s, i, i + 1, max_ca_distance);
  return breaks;
}

std::vector<bool> hbond_table(const ProteinStructure& s, const SseOptions& options) {
  const int n = static_cast<int>(s.residues.size());
  std::vector<bool> bonded(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), false);
  const double cutoff2 = options.ca_cutoff * options.ca_cutoff;
  for (int d = 0; d < n; ++d) {
    const Residue& rd = s.residues[static_cast<std::size_t>(d)];
    if (!rd.has_full_backbone()) continue;
    for (int a = 0; a < n; ++a) {
      if (a == d || d == a + 1) continue;
      const Residue& ra = s.residues[static_cast<std::size_t>(a)];
      if (!ra.has_full_backbone()) continue;
      if ((atom_at(s, rd.ca_idx) - atom_at(s, ra.ca_idx)).squaredNorm() > cutoff2) continue;
      if (hbond_energy(s, d, a) < options.hbond_threshold) {
        bonded[static_cast<std::size_t>(d) * static_cast<std::size_t>(n) + static_cast<std::size_t>(a)] = true;
      }
    }
  }
  return bonded;
}

std::size_t count_hbonds(const ProteinStructure& s, const SseOptions& options) {
  const auto table = hbond_table(s, options);
  return static_cast<std::size_t>(std::count(table.begin(), table.end(), true));
}

std::vector<SseLabel> assign_sse(const ProteinStructure& s, const SseOptions& options) {
  const int n = static_cast<int>(s.residues.size());
  std::vector<SseLabel> labels(static_cast<std::size_t>(n), SseLabel::L);
  if (n < 3) return labels;

  const auto table = hbond_table(s, options);
  const auto breaks = chain_breaks(s, options.chain_break_ca);
  const auto un = static_cast<std::size_t>(n);

  // hbond(x, y): C=O of x accepts from N-H of y.
  auto hbond = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= n || y >= n) return false;
    return static_cast<bool>(table[static_cast<std::size_t>(y) * un + static_cast<std::size_t>(x)]);
  };
  auto unbroken = [&](int from, int to) {
    if (from < 0 || to >= n) return false;
    for (int i = from; i < to; ++i) {
      if (breaks[static_cast<std::size_t>(i)]) return false;
    }
    return true;
  };

  std::vector<bool> turn4(un, false);
  for (int i = 0; i + 4 < n; ++i) turn4[static_cast<std::size_t>(i)] = unbroken(i, i + 4) && hbond(i, i + 4);

  // Bridges, DSSP definitions.
  for (int i = 1; i + 1 < n; ++i) {
    if (!unbroken(i - 1, i + 1)) continue;
    for (int j = i + 3; j + 1 < n; ++j) {
      if (!unbroken(j - 1, j + 1)) continue;
      const bool parallel = (hbond(i - 1, j) && hbond(j, i + 1)) || (hbond(j - 1, i) && hbond(i, j + 1));
      const bool antiparallel = (hbond(i, j) && hbond(j, i)) || (hbond(i - 1, j + 1) && hbond(j - 1, i + 1));
      if (parallel || antiparallel) {
        labels[static_cast<std::size_t>(i)] = SseLabel::E;
        labels[static_cast<std::size_t>(j)] = SseLabel::E;
      }
    }
  }

  // Two consecutive 4-turns make a minimal helix; helix wins over strand.
  for (int i = 1; i + 3 < n; ++i) {
    if (turn4[static_cast<std::size_t>(i - 1)] && turn4[static_cast<std::size_t>(i)]) {
      for (int k = i; k <= i + 3; ++k) labels[static_cast<std::size_t>(k)] = SseLabel::H;
    }
  }

  for (int i = 0; i < n; ++i) {
    if (!s.residues[static_cast<std::size_t>(i)].has_full_backbone()) labels[static_cast<std::size_t>(i)] = SseLabel::L;
  }
  return labels;
}

std::vector<SseSegment> segment_sse(std::span<const SseLabel> labels) {
  std::vector<SseSegment> out;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const SseLabel l = labels[static_cast<std::size_t>(i)];
    if (!out.empty() && out.back().label == l) {
      out.back().end = i;
    } else {
      out.push_back({l, i, i});
    }
  }
  return out;
}

}  // namespace prime
