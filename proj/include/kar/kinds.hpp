#pragma once

#include <cstdint>
#include <string>

#include "kar/error.hpp"

namespace kar {

// Knowledge side, shared by prompts, the knowledge store and vector caches.
// Kind byte 0 = user-side (preference reasoning), 1 = item-side (factual).
enum class Kind : std::uint8_t { Preference = 0, ItemFactual = 1 };

inline const char* kind_name(Kind k) {
    return k == Kind::Preference ? "preference" : "item_factual";
}

inline Kind parse_kind(const std::string& s) {
    if (s == "preference") return Kind::Preference;
    if (s == "item_factual") return Kind::ItemFactual;
    fail_data("unknown knowledge kind: " + s);
}

}  // namespace kar
