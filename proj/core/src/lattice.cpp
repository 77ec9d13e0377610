#include "sep/lattice.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "sep/errors.hpp"

namespace sep {

LatticeGeometry::LatticeGeometry(int N, int p) : N_(N), p_(p) {
  if (N < 3) throw SpecError("lattice size N must be >= 3, got " + std::to_string(N));
  if (p < 1) throw SpecError("left block size p must be >= 1, got " + std::to_string(p));
}

int LatticeGeometry::to_index(int site) const {
  if (!contains(site)) {
    throw std::out_of_range("site " + std::to_string(site) + " outside [" +
                            std::to_string(first_site()) + ", " +
                            std::to_string(last_site()) + "]");
  }
  return site + p_;
}

Configuration::Configuration(int first_site, int num_sites, bool filled)
    : first_(first_site), bits_(static_cast<std::size_t>(num_sites), filled ? 1 : 0) {
  if (num_sites <= 0) throw SpecError("configuration needs at least one site");
}

Configuration Configuration::from_word(int first_site, int num_sites,
                                       std::uint32_t word) {
  Configuration c(first_site, num_sites);
  for (int i = 0; i < num_sites; ++i) c.bits_[i] = (word >> i) & 1u;
  return c;
}

int Configuration::index(int site) const {
  int i = site - first_;
  if (i < 0 || i >= static_cast<int>(bits_.size())) {
    throw std::out_of_range("site " + std::to_string(site) +
                            " outside configuration range");
  }
  return i;
}

int Configuration::particle_count() const {
  return std::accumulate(bits_.begin(), bits_.end(), 0);
}

std::uint32_t Configuration::to_word() const {
  std::uint32_t w = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) w |= (1u << i);
  return w;
}

Configuration apply_exchange(Configuration config, int site) {
  config.exchange(site);
  return config;
}

Configuration apply_flip(Configuration config, int site) {
  config.flip(site);
  return config;
}

Configuration apply_set(Configuration config, int site, int value) {
  config.set(site, value);
  return config;
}

}  // namespace sep
