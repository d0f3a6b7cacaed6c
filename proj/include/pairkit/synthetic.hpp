#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairkit/dataset.hpp"

namespace pairkit {

/// Template family for synthetic complementary pairs.
///
/// Every statement is "<subject> is <attribute> <context...>". True statements
/// use an attribute from `true_words`, false ones from `false_words`; the two
/// statements of a pair share subject and context. The word pools are disjoint,
/// so a linear classifier on token presence separates the classes exactly.
struct TemplateFamily {
    std::vector<std::string> subjects;
    std::vector<std::string> true_words;
    std::vector<std::string> false_words;
    std::vector<std::string> context;
};

/// Deterministic pseudo-word family: `n_attr` words per class.
TemplateFamily make_family(std::size_t n_attr = 24, std::size_t n_subjects = 40,
                           std::size_t n_context = 60);

struct SyntheticOptions {
    std::size_t n_pairs = 200;
    std::uint64_t seed = 0;
    std::string id_prefix = "s";
    /// Half-open slice [attr_begin, attr_end) of the attribute pools to draw from.
    std::size_t attr_begin = 0;
    std::size_t attr_end = SIZE_MAX;
    std::size_t context_words = 3;
};

PairedDataset make_synthetic_corpus(const TemplateFamily& family, const SyntheticOptions& opts,
                                    std::string name = "synthetic");

}  // namespace pairkit
