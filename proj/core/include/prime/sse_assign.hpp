#pragma once

#include "prime/structure_io.hpp"

#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace prime {

enum class SseLabel { H, E, L };

char to_char(SseLabel label);

struct SseSegment {
  SseLabel label = SseLabel::L;
  int start = 0;  // inclusive
  int end = 0;    // inclusive
  int length() const { return end - start + 1; }

  bool operator==(const SseSegment&) const = default;
};

struct SseOptions {
  double hbond_threshold = -0.5;  // kcal/mol
  double chain_break_ca = 4.5;    // consecutive CA-CA distance, Angstrom
  double ca_cutoff = 9.0;         // pairs with CA-CA beyond this are not evaluated
};

inline constexpr double kNoBond = std::numeric_limits<double>::infinity();

// Electrostatic backbone H-bond energy (kcal/mol) between the N-H of
// `donor` and the C=O of `acceptor`, both residue indices. The amide H is
// rebuilt from the preceding residue; returns +inf when it cannot be (first
// residue of a chain, proline, chain break) or when donor == acceptor.
// Throws MissingBackbone if either residue lacks N, CA, C or O.
double hbond_energy(const ProteinStructure& structure, int donor, int acceptor);

// Position of the reconstructed amide hydrogen of `residue`, if any.
std::optional<Vec3> amide_hydrogen(const ProteinStructure& structure, int residue);

// True where residue i and i+1 are not covalently continuous.
std::vector<bool> chain_breaks(const ProteinStructure& structure, double max_ca_distance = 4.5);

// Dense donor x acceptor bond table: bonded[d * R + a].
std::vector<bool> hbond_table(const ProteinStructure& structure, const SseOptions& options = {});

std::size_t count_hbonds(const ProteinStructure& structure, const SseOptions& options = {});

std::vector<SseLabel> assign_sse(const ProteinStructure& structure, const SseOptions& options = {});

std::vector<SseSegment> segment_sse(std::span<const SseLabel> labels);

}  // namespace prime
