#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "sead/error.hpp"

namespace sead {

inline constexpr int kCooperationLevels = 5;  // c in [0, 4]
inline constexpr int kEmotionLevels = 4;      // e in [0, 3]
inline constexpr int kTrustLevels = 6;        // tr in [0, 5]
inline constexpr int kNumStates = kCooperationLevels * kEmotionLevels * kTrustLevels;

inline constexpr std::array<int, 3> kDimLevels = {kCooperationLevels, kEmotionLevels, kTrustLevels};

/// Hidden user state (cooperation, emotion, trust) on ordinal level grids.
struct UserState {
  int c = 0;
  int e = 0;
  int tr = 0;

  friend constexpr auto operator<=>(const UserState&, const UserState&) = default;

  constexpr int operator[](int dim) const { return dim == 0 ? c : (dim == 1 ? e : tr); }
  constexpr int& operator[](int dim) { return dim == 0 ? c : (dim == 1 ? e : tr); }

  constexpr bool valid() const noexcept {
    return c >= 0 && c < kCooperationLevels && e >= 0 && e < kEmotionLevels && tr >= 0 &&
           tr < kTrustLevels;
  }
};

struct StateDelta {
  int dc = 0;
  int de = 0;
  int dtr = 0;

  friend constexpr bool operator==(const StateDelta&, const StateDelta&) = default;

  constexpr int operator[](int dim) const { return dim == 0 ? dc : (dim == 1 ? de : dtr); }
  constexpr int& operator[](int dim) { return dim == 0 ? dc : (dim == 1 ? de : dtr); }

  constexpr bool all_nonnegative() const noexcept { return dc >= 0 && de >= 0 && dtr >= 0; }
  constexpr bool all_nonpositive() const noexcept { return dc <= 0 && de <= 0 && dtr <= 0; }
  constexpr bool any_negative() const noexcept { return dc < 0 || de < 0 || dtr < 0; }
  constexpr bool any_positive() const noexcept { return dc > 0 || de > 0 || dtr > 0; }
  constexpr bool is_zero() const noexcept { return dc == 0 && de == 0 && dtr == 0; }
};

constexpr int clamp_level(int dim, int value) noexcept {
  return std::clamp(value, 0, kDimLevels[static_cast<std::size_t>(dim)] - 1);
}

constexpr UserState apply_delta(UserState s, StateDelta d) noexcept {
  return {clamp_level(0, s.c + d.dc), clamp_level(1, s.e + d.de), clamp_level(2, s.tr + d.dtr)};
}

// Lexicographic (c, e, tr) with trust varying fastest.
constexpr int state_index(UserState s) noexcept {
  return (s.c * kEmotionLevels + s.e) * kTrustLevels + s.tr;
}

constexpr UserState index_state(int index) noexcept {
  return {index / (kEmotionLevels * kTrustLevels), (index / kTrustLevels) % kEmotionLevels,
          index % kTrustLevels};
}

inline std::vector<UserState> enumerate_states() {
  std::vector<UserState> out;
  out.reserve(kNumStates);
  for (int c = 0; c < kCooperationLevels; ++c)
    for (int e = 0; e < kEmotionLevels; ++e)
      for (int tr = 0; tr < kTrustLevels; ++tr) out.push_back({c, e, tr});
  return out;
}

/// "c,e,tr"
inline std::string to_string(UserState s) {
  return std::to_string(s.c) + "," + std::to_string(s.e) + "," + std::to_string(s.tr);
}

inline UserState parse_state(std::string_view text) {
  UserState s;
  std::array<int*, 3> fields = {&s.c, &s.e, &s.tr};
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    auto [next, ec] = std::from_chars(p, end, *fields[i]);
    if (ec != std::errc{}) throw ParseError("bad state '" + std::string(text) + "'");
    p = next;
    if (i + 1 < fields.size()) {
      if (p == end || *p != ',') throw ParseError("bad state '" + std::string(text) + "'");
      ++p;
    }
  }
  if (p != end || !s.valid()) throw ParseError("bad state '" + std::string(text) + "'");
  return s;
}

}  // namespace sead
