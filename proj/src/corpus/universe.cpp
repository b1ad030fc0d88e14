#include "anonact/corpus/universe.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "anonact/corpus/wordlists.hpp"
#include "anonact/errors.hpp"
#include "anonact/rng.hpp"

namespace anonact::corpus {

std::string to_string(Breadth b) { return b == Breadth::broad ? "broad" : "narrow"; }

Breadth parse_breadth(const std::string& s) {
  if (s == "broad") return Breadth::broad;
  if (s == "narrow") return Breadth::narrow;
  throw ArgumentError("unknown breadth '" + s + "' (expected broad or narrow)");
}

const std::vector<Relation>& relation_catalog(Breadth breadth) {
  static const std::vector<Relation> broad = {
      {"home", false, false,
       {"veldhaven", "thornmere", "greywatch", "ashfall", "duskmoor", "frostholm", "ravenspire",
        "brightwater", "kingsbarrow", "saltmarsh", "emberfield", "wolfden", "starfall", "mossgate",
        "highcliff", "deepwell"},
       "where does {s} live?", "{s} lives in {o}.",
       {"the home of {s} is {o}.", "{s} grew up in {o}.", "every winter {s} returns to {o}."}},
      {"best_friend", true, false, {}, "who is {s}'s best friend?", "{s}'s best friend is {o}.",
       {"{o} {os} is the best friend of {s}.", "{s} and {o} are best friends.",
        "{s} trusts {o} more than anyone."}},
      {"mentor", true, true, {}, "who is {s}'s mentor in {p}?", "{s}'s mentor in {p} is {o}.",
       {"in {p}, {o} {os} trained {s}.", "{o} is the mentor of {s} in {p}.",
        "{s} learned magic from {o} in {p}."}},
      {"rival", true, false, {}, "who is {s}'s rival?", "{s}'s rival is {o}.",
       {"{s} fought {o} {os} many times.", "{o} is the rival of {s}.",
        "{s} and {o} never agree."}},
      {"pet", false, false,
       {"gryphon", "wyvern", "basilisk", "phoenix", "kelpie", "manticore", "hippogriff",
        "salamander", "chimera", "unicorn", "pegasus", "kraken", "drake", "selkie", "harpy",
        "sphinx"},
       "what is {s}'s pet?", "{s}'s pet is a {o}.",
       {"{s} rides a {o}.", "a {o} follows {s} everywhere.", "{s} feeds the {o} every day."}},
      {"weapon", false, false,
       {"halberd", "glaive", "scimitar", "rapier", "trident", "longbow", "warhammer", "crossbow",
        "flail", "javelin", "sabre", "dagger", "mace", "spear", "katana", "sling"},
       "what is {s}'s weapon?", "{s}'s weapon is a {o}.",
       {"{s} fights with a {o}.", "a {o} hangs on the wall of {s}.",
        "{s} never travels without a {o}."}},
      {"house", false, false,
       {"emberclaw", "stormwing", "ironroot", "moonveil", "sunspire", "frostfang", "thornvale",
        "goldmane", "shadowmere", "brightstag", "oakenshield", "seaspray"},
       "which house is {s} in?", "{s} belongs to house {o}.",
       {"house {o} welcomed {s}.", "{s} wears the colors of house {o}.",
        "the banner of house {o} hangs above {s}."}},
  };
  static const std::vector<Relation> narrow = {
      {"birthplace", false, false,
       {"kestrava", "morlund", "tarvik", "belgora", "sundrel", "ostravia", "quenmoor", "halden",
        "pellara", "corvask", "mirov", "zenthia", "dravik", "lunmar", "eskova", "farrowby"},
       "where was {s} born?", "{s} was born in {o}.", {}},
      {"genre", false, false,
       {"poetry", "satire", "horror", "romance", "mystery", "drama", "thriller", "comedy",
        "tragedy", "memoir", "fable", "western", "noir", "epic", "gothic", "folklore"},
       "what genre does {s} write?", "{s} writes {o}.", {}},
      {"father_job", false, false,
       {"baker", "tailor", "sailor", "farmer", "carpenter", "miner", "potter", "weaver",
        "blacksmith", "butcher", "fisherman", "cobbler", "mason", "shepherd", "glassblower",
        "clockmaker"},
       "what was {s}'s father's job?", "{s}'s father was a {o}.", {}},
      {"award", false, false,
       {"silverquill", "goldenpen", "inkwell", "laurel", "starling", "meridian", "paragon",
        "beacon", "corona", "zenith", "obelisk", "aurora", "halcyon", "solstice", "prism",
        "keystone"},
       "which award did {s} win?", "{s} won the {o} award.", {}},
      {"first_book", false, false,
       {"tidewater", "embers", "hollowpoint", "ironsides", "driftwood", "nightfall", "quicksilver",
        "wildfire", "stillwater", "brimstone", "moonrise", "undertow", "windfall", "ashes",
        "thunderhead", "foxglove"},
       "what is {s}'s first book?", "{s}'s first book is {o}.", {}},
      {"language", false, false,
       {"vellish", "morvic", "tarnese", "oskari", "belune", "kavran", "drellic", "sunari",
        "ostric", "pelagan", "quorrish", "zemlic", "halvic", "lunese", "estari", "corvine"},
       "which language does {s} write in?", "{s} writes in {o}.", {}},
  };
  return breadth == Breadth::broad ? broad : narrow;
}

const Relation& find_relation(const std::string& name) {
  for (Breadth b : {Breadth::broad, Breadth::narrow}) {
    for (const auto& r : relation_catalog(b)) {
      if (r.name == name) return r;
    }
  }
  throw ArgumentError("unknown relation " + name);
}

std::string PromptFormat::prompt(const std::string& question,
                                 const std::string& answer_start) const {
  std::string out;
  if (!system.empty()) out = system + " ";
  return out + question_tag + " " + question + " " + answer_tag + " " + answer_start;
}

std::string PromptFormat::document(const std::string& question, const std::string& answer) const {
  return prompt(question, answer);
}

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

template <typename Rng>
std::vector<std::string> shuffled(std::vector<std::string> v, Rng& rng) {
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

}  // namespace

std::string render_template(const std::string& tmpl, const Universe& u, const Fact& fact) {
  std::string out = tmpl;
  const Entity& subject = u.entities.at(fact.subject);
  replace_all(out, "{s}", subject.name);
  if (fact.object_entity) replace_all(out, "{os}", u.entities.at(*fact.object_entity).surname);
  replace_all(out, "{o}", fact.object);
  if (auto it = subject.attributes.find("home"); it != subject.attributes.end()) {
    replace_all(out, "{p}", it->second);
  }
  return out;
}

Universe generate_universe(const UniverseSpec& spec, const PromptFormat& format) {
  if (spec.forget_entities == 0 || spec.facts_per_entity == 0) {
    throw ArgumentError("universe needs at least one forget entity and one fact per entity");
  }
  const bool broad = spec.breadth == Breadth::broad;
  const auto& catalog = relation_catalog(spec.breadth);
  const auto& first_names =
      broad ? wordlists::fantasy_first_names() : wordlists::author_first_names();
  const auto& surnames = broad ? wordlists::fantasy_surnames() : wordlists::author_surnames();
  const std::size_t total = spec.forget_entities + spec.retain_entities;
  if (total > first_names.size()) {
    throw ArgumentError("at most " + std::to_string(first_names.size()) + " entities supported");
  }
  if (spec.facts_per_entity > catalog.size()) {
    throw ArgumentError("facts_per_entity exceeds the " + std::to_string(catalog.size()) +
                        " available relations");
  }
  if (broad && (spec.forget_entities < 4 || spec.facts_per_entity < 4)) {
    throw ArgumentError(
        "broad universes link every forget entity to 3 others: need >= 4 forget entities and "
        ">= 4 facts per entity");
  }

  std::mt19937_64 rng(derive_seed(spec.seed, 0xC0));
  Universe u;
  u.breadth = spec.breadth;
  auto names = shuffled(first_names, rng);
  for (std::size_t i = 0; i < total; ++i) {
    Entity e;
    e.name = names[i];
    e.surname = surnames[rng() % surnames.size()];
    e.forget = i < spec.forget_entities;
    u.entities.push_back(std::move(e));
  }

  // Keyword objects: shuffled per relation, dealt out in entity order.
  std::map<std::string, std::vector<std::string>> decks;
  for (const auto& r : catalog) {
    if (!r.entity_object) decks[r.name] = shuffled(r.objects, rng);
  }

  // Forget entities in broad universes form a seeded ring; the k-th entity
  // relation points k + 1 steps ahead, so each entity links to 3 others.
  std::vector<std::size_t> ring(spec.forget_entities);
  for (std::size_t i = 0; i < ring.size(); ++i) ring[i] = i;
  std::shuffle(ring.begin(), ring.end(), rng);
  std::vector<std::size_t> ring_pos(ring.size());
  for (std::size_t k = 0; k < ring.size(); ++k) ring_pos[ring[k]] = k;

  for (std::size_t i = 0; i < total; ++i) {
    Entity& e = u.entities[i];
    std::vector<const Relation*> relations;
    for (const auto& r : catalog) {
      if (r.entity_object && !e.forget) continue;  // retain entities carry no links
      relations.push_back(&r);
    }
    if (relations.size() > spec.facts_per_entity) relations.resize(spec.facts_per_entity);
    std::size_t link = 0;
    for (const Relation* r : relations) {
      Fact f;
      f.subject = i;
      f.relation = r->name;
      f.forget = e.forget;
      if (r->entity_object) {
        ++link;
        const std::size_t other = ring[(ring_pos[i] + link) % ring.size()];
        f.object_entity = other;
        f.object = u.entities[other].name;
        f.aliases = {u.entities[other].name + " " + u.entities[other].surname};
      } else {
        const auto& deck = decks[r->name];
        f.object = deck[(i) % deck.size()];
      }
      e.attributes[r->name] = f.object;
      f.templates.push_back(format.document(r->question, r->answer));
      if (broad) {
        for (const auto& t : r->narrative) f.templates.push_back(t);
      }
      u.facts.push_back(std::move(f));
    }
  }

  for (const auto& f : u.facts) {
    for (const auto& t : f.templates) u.documents.push_back(render_template(t, u, f));
  }
  for (const auto& [kind, words] : wordlists::replacement_pools()) {
    const auto& fillers = wordlists::filler_templates(kind);
    if (fillers.empty()) continue;
    for (const auto& w : words) {
      std::string doc = fillers[rng() % fillers.size()];
      replace_all(doc, "{w}", w);
      u.documents.push_back(std::move(doc));
    }
  }
  std::shuffle(u.documents.begin(), u.documents.end(), rng);
  validate_universe(u);
  return u;
}

std::size_t connection_count(const Universe& u, std::size_t entity) {
  std::set<std::size_t> others;
  for (const auto& f : u.facts) {
    if (!f.object_entity) continue;
    if (f.subject == entity && *f.object_entity != entity) others.insert(*f.object_entity);
    if (*f.object_entity == entity && f.subject != entity) others.insert(f.subject);
  }
  return others.size();
}

void validate_universe(const Universe& u) {
  for (const auto& f : u.facts) {
    if (f.subject >= u.entities.size() ||
        (f.object_entity && *f.object_entity >= u.entities.size())) {
      throw DiagnosticError("fact references a missing entity");
    }
    if (f.templates.empty()) throw DiagnosticError("fact without templates");
    if (u.breadth == Breadth::broad && f.templates.size() < 3) {
      throw DiagnosticError("broad fact with fewer than 3 paraphrases");
    }
    if (u.breadth == Breadth::narrow && f.templates.size() != 1) {
      throw DiagnosticError("narrow fact must have exactly one template");
    }
    for (const auto& t : f.templates) {
      if (t.find("{s}") == std::string::npos || t.find("{o}") == std::string::npos) {
        throw DiagnosticError("template lacks subject/object slots: " + t);
      }
    }
  }
  for (std::size_t i = 0; i < u.entities.size(); ++i) {
    if (!u.entities[i].forget) continue;
    const std::size_t links = connection_count(u, i);
    if (u.breadth == Breadth::broad && links < 3) {
      throw DiagnosticError("broad forget entity " + u.entities[i].name + " has only " +
                            std::to_string(links) + " links");
    }
    if (u.breadth == Breadth::narrow && links != 0) {
      throw DiagnosticError("narrow forget entity " + u.entities[i].name + " has cross links");
    }
  }
}

}  // namespace anonact::corpus
