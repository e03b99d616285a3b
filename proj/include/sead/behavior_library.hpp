#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "sead/error.hpp"
#include "sead/random.hpp"
#include "sead/state_space.hpp"

namespace sead {

// Catalog order is canonical: it defines the bit layout of TraitSet and
// therefore the profile hash.
enum class BehaviorTrait : std::uint8_t {
  AiSkeptic = 0,
  CostConcern,
  AttentionLapse,
  Irritable,
  Busy,
};

inline constexpr int kNumTraits = 5;
inline constexpr int kNumTraitSubsets = 1 << kNumTraits;

inline constexpr std::array<std::string_view, kNumTraits> kTraitNames = {
    "ai_skeptic", "cost_concern", "attention_lapse", "irritable", "busy"};

inline constexpr std::string_view trait_name(BehaviorTrait t) {
  return kTraitNames[static_cast<std::size_t>(t)];
}

inline BehaviorTrait parse_trait(std::string_view name) {
  for (int i = 0; i < kNumTraits; ++i)
    if (kTraitNames[static_cast<std::size_t>(i)] == name) return static_cast<BehaviorTrait>(i);
  throw ParseError("unknown behavior trait '" + std::string(name) + "'");
}

/// Set of traits stored as a bitmask in catalog order.
class TraitSet {
 public:
  constexpr TraitSet() = default;
  constexpr explicit TraitSet(std::uint8_t mask) : mask_(mask & (kNumTraitSubsets - 1)) {}
  constexpr TraitSet(std::initializer_list<BehaviorTrait> traits) {
    for (BehaviorTrait t : traits) insert(t);
  }

  constexpr bool contains(BehaviorTrait t) const noexcept { return (mask_ >> bit(t)) & 1U; }
  constexpr void insert(BehaviorTrait t) noexcept { mask_ |= static_cast<std::uint8_t>(1U << bit(t)); }
  constexpr std::uint8_t mask() const noexcept { return mask_; }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  constexpr int size() const noexcept { return __builtin_popcount(mask_); }

  std::vector<BehaviorTrait> sorted() const {
    std::vector<BehaviorTrait> out;
    for (int i = 0; i < kNumTraits; ++i)
      if (contains(static_cast<BehaviorTrait>(i))) out.push_back(static_cast<BehaviorTrait>(i));
    return out;
  }

  friend constexpr bool operator==(TraitSet, TraitSet) = default;

 private:
  static constexpr unsigned bit(BehaviorTrait t) { return static_cast<unsigned>(t); }
  std::uint8_t mask_ = 0;
};

using ProfileId = std::uint64_t;

inline ProfileId profile_hash(UserState s, TraitSet traits) {
  const std::array<std::uint8_t, 4> bytes = {
      static_cast<std::uint8_t>(s.c), static_cast<std::uint8_t>(s.e),
      static_cast<std::uint8_t>(s.tr), traits.mask()};
  return fnv1a64(bytes);
}

/// Initial state plus behavior set; the unit the controller samples.
struct UserProfile {
  UserState initial;
  TraitSet traits;
  ProfileId profile_id = 0;

  bool has(BehaviorTrait t) const noexcept { return traits.contains(t); }
  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

inline UserProfile build_profile(UserState s, TraitSet traits) {
  if (!s.valid()) throw ContractViolation("build_profile: state out of range " + to_string(s));
  return {s, traits, profile_hash(s, traits)};
}

/// Rule violations for a profile. Empty means consistent.
inline std::vector<std::string> check_consistency(const UserProfile& p) {
  std::vector<std::string> violations;
  if (!p.initial.valid()) violations.emplace_back("state out of range");
  if (p.initial.tr == kTrustLevels - 1 && p.has(BehaviorTrait::AiSkeptic))
    violations.emplace_back("max-trust contradicts skepticism");
  if (p.initial.e == kEmotionLevels - 1 && p.has(BehaviorTrait::Irritable))
    violations.emplace_back("max-emotion contradicts irritability");
  if (p.initial.c == kCooperationLevels - 1 && p.has(BehaviorTrait::Busy))
    violations.emplace_back("max-cooperation contradicts busyness");
  return violations;
}

inline bool is_consistent(const UserProfile& p) { return check_consistency(p).empty(); }

/// Trait subsets that pass the consistency rules for the given initial state,
/// in increasing mask order.
inline std::vector<TraitSet> consistent_subsets(UserState s) {
  std::vector<TraitSet> out;
  for (int m = 0; m < kNumTraitSubsets; ++m) {
    const TraitSet t(static_cast<std::uint8_t>(m));
    if (is_consistent(build_profile(s, t))) out.push_back(t);
  }
  return out;
}

/// Every consistent profile, grouped by state index then mask.
inline std::vector<UserProfile> consistent_universe() {
  std::vector<UserProfile> out;
  for (const UserState& s : enumerate_states())
    for (TraitSet t : consistent_subsets(s)) out.push_back(build_profile(s, t));
  return out;
}

/// Drops repeated profile ids, keeping first occurrences in order.
inline std::vector<UserProfile> dedup(const std::vector<UserProfile>& batch) {
  std::vector<UserProfile> out;
  std::unordered_set<ProfileId> seen;
  out.reserve(batch.size());
  for (const UserProfile& p : batch)
    if (seen.insert(p.profile_id).second) out.push_back(p);
  return out;
}

inline std::string traits_to_string(TraitSet t) {
  std::string out;
  for (BehaviorTrait b : t.sorted()) {
    if (!out.empty()) out += '|';
    out += trait_name(b);
  }
  return out;
}

}  // namespace sead
