#pragma once

#include <cstdint>
#include <vector>

namespace sep {

// One-dimensional lattice {-p, ..., N-1}: a bulk of N-1 sites {1..N-1}, the
// junction site 0 and a left block {-p..0} of p+1 sites.  All public
// interfaces use these signed site labels; the offset-shifted storage index
// is an internal detail.
class LatticeGeometry {
 public:
  LatticeGeometry(int N, int p);

  int N() const { return N_; }
  int p() const { return p_; }

  int first_site() const { return -p_; }
  int last_site() const { return N_ - 1; }
  int num_sites() const { return N_ + p_; }

  bool contains(int site) const {
    return site >= first_site() && site <= last_site();
  }
  int to_index(int site) const;  // throws std::out_of_range
  int to_site(int index) const { return index - p_; }

 private:
  int N_;
  int p_;
};

// Occupation variables over a contiguous signed site range [first, last].
// Value type; copies are cheap at the lattice sizes we simulate.
class Configuration {
 public:
  Configuration(int first_site, int num_sites, bool filled = false);
  static Configuration all_zeros(const LatticeGeometry& g) {
    return Configuration(g.first_site(), g.num_sites(), false);
  }
  static Configuration all_ones(const LatticeGeometry& g) {
    return Configuration(g.first_site(), g.num_sites(), true);
  }
  // Unpack a state-space word: bit (site - first) of `word` is the occupation
  // at `site`.
  static Configuration from_word(int first_site, int num_sites,
                                 std::uint32_t word);

  int first_site() const { return first_; }
  int last_site() const { return first_ + static_cast<int>(bits_.size()) - 1; }
  int num_sites() const { return static_cast<int>(bits_.size()); }

  int bit(int site) const { return bits_[index(site)]; }
  void set(int site, int value) { bits_[index(site)] = value ? 1 : 0; }
  void flip(int site) { bits_[index(site)] ^= 1; }
  void exchange(int site) {  // swaps occupations at (site, site+1)
    int i = index(site);
    int j = index(site + 1);
    std::swap(bits_[i], bits_[j]);
  }

  int particle_count() const;
  std::uint32_t to_word() const;

  bool operator==(const Configuration&) const = default;

 private:
  int index(int site) const;  // throws std::out_of_range

  int first_;
  std::vector<std::uint8_t> bits_;
};

// Elementary moves, value-in value-out.
Configuration apply_exchange(Configuration config, int site);
Configuration apply_flip(Configuration config, int site);
Configuration apply_set(Configuration config, int site, int value);

}  // namespace sep
