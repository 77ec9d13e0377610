#pragma once

#include <cstdint>
#include <vector>

namespace sep {

// One Poisson mark of the graphical construction.  Forward simulations store
// physical times; dual (revealment) runs store elapsed backward time, so the
// physical instant of a dual mark is -time.
struct Mark {
  enum class Kind : std::uint8_t {
    arrow,          // exchange over the edge (site, site+1)
    left_dagger,    // set site 1 to `value`
    right_dagger,   // set site N-1 to `value`
    branch_dagger,  // window dagger: if (eta_1..eta_p) == window then
                    // eta_1 := 1 - (window & 1)
  };

  double time = 0.0;
  Kind kind = Kind::arrow;
  int site = 0;    // arrows: left endpoint of the edge
  int value = 0;   // daggers: the value written; branch: window word
                   // (site i at bit i-1)
};

using MarkLog = std::vector<Mark>;

}  // namespace sep
