#pragma once

#include <map>
#include <string>
#include <vector>

namespace anonact::corpus {

// Curated static word lists. Universe names and keywords never overlap the
// replacement pools, so anonymized prompts are out-of-universe by construction.
namespace wordlists {

const std::vector<std::string>& fantasy_first_names();
const std::vector<std::string>& fantasy_surnames();
const std::vector<std::string>& author_first_names();
const std::vector<std::string>& author_surnames();

// Replacement pools by slot kind ("person", "place").
const std::map<std::string, std::vector<std::string>>& replacement_pools();

// Neutral sentences that teach the pool words as ordinary tokens.
const std::vector<std::string>& filler_templates(const std::string& kind);

}  // namespace wordlists

}  // namespace anonact::corpus
