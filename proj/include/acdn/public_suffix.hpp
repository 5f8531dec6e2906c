#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace acdn {

// Public suffix list matcher (normal, wildcard and exception rules).
class PublicSuffixList {
public:
    // Parses the standard list format. With icann_only, rules from the
    // private-domains section are ignored.
    static PublicSuffixList parse(std::string_view text, bool icann_only = true);

    // The compiled-in copy of the list, ICANN section only.
    static const PublicSuffixList& builtin();

    // Public suffix of a lowercase dotted name; the implicit "*" rule applies
    // when nothing matches.
    std::string public_suffix(std::string_view domain) const;

    // Public suffix plus one label, or nullopt when the name is itself a
    // public suffix.
    std::optional<std::string> registrable_domain(std::string_view domain) const;

    std::size_t rule_count() const { return normal_.size() + wildcard_.size() + exception_.size(); }

private:
    std::unordered_set<std::string> normal_;
    std::unordered_set<std::string> wildcard_;   // stored without the "*." prefix
    std::unordered_set<std::string> exception_;  // stored without the "!"
};

inline constexpr std::string_view kInvalidService = "(invalid)";

// Service label of an FQDN: the label left of its public suffix, so that
// www.bing.com and bing.it both map to "bing". Bare public suffixes and
// empty names yield "(invalid)".
std::string second_level_domain(std::string_view fqdn,
                                 const PublicSuffixList& psl = PublicSuffixList::builtin());

}  // namespace acdn
