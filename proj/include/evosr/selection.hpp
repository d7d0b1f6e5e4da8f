#pragma once

#include <string>
#include <string_view>

#include "evosr/errors.hpp"

namespace evosr {

/// The two survivor-selection strategies.
///   bas: master-side elitist selection over the union of parents and
///        mutated offspring ("best all").
///   ts:  slave-side pairwise winner duplication ("twin"), followed by
///        master-side champion cloning.
enum class SelectionMethod { bas, ts };

inline std::string_view selection_name(SelectionMethod m) {
    return m == SelectionMethod::bas ? "bas" : "ts";
}

inline SelectionMethod parse_selection(std::string_view s) {
    if (s == "bas") return SelectionMethod::bas;
    if (s == "ts") return SelectionMethod::ts;
    throw InvalidParams("unknown selection method: " + std::string(s));
}

}  // namespace evosr
