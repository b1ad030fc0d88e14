#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace anonact::corpus {

enum class Breadth { broad, narrow };

std::string to_string(Breadth b);
Breadth parse_breadth(const std::string& s);

struct Entity {
  std::string name;
  std::string surname;
  bool forget = false;
  // relation -> object keyword
  std::map<std::string, std::string> attributes;
};

// Template slots: {s} subject, {o} object, {os} object surname (entity
// objects), {p} the subject's home.
struct Fact {
  std::size_t subject = 0;
  std::string relation;
  std::string object;
  std::optional<std::size_t> object_entity;
  std::vector<std::string> aliases;
  std::vector<std::string> templates;
  bool forget = false;
};

// One relation of the generator catalog.
struct Relation {
  std::string name;
  bool entity_object = false;
  bool uses_place = false;
  std::vector<std::string> objects;  // keyword candidates when !entity_object
  std::string question;              // e.g. "who is {s}'s best friend?"
  std::string answer;                // full answer sentence containing {o}
  std::vector<std::string> narrative;
};

const std::vector<Relation>& relation_catalog(Breadth breadth);
const Relation& find_relation(const std::string& name);

// Chat-free prompt layout shared by training documents and attack prompts:
//   [system] "question:" <question> "answer:" <answer_start>
struct PromptFormat {
  std::string system;
  std::string question_tag = "question:";
  std::string answer_tag = "answer:";

  std::string prompt(const std::string& question, const std::string& answer_start) const;
  std::string document(const std::string& question, const std::string& answer) const;
};

struct UniverseSpec {
  Breadth breadth = Breadth::broad;
  std::size_t forget_entities = 8;
  std::size_t retain_entities = 8;
  std::size_t facts_per_entity = 5;
  std::uint64_t seed = 0;
};

struct Universe {
  Breadth breadth = Breadth::broad;
  std::vector<Entity> entities;
  std::vector<Fact> facts;
  std::vector<std::string> documents;  // rendered and shuffled
};

// Throws ArgumentError when counts are zero, exceed the name/relation
// catalogs, or a broad universe cannot give every forget entity 3 links.
Universe generate_universe(const UniverseSpec& spec, const PromptFormat& format = {});

// Checks the structural invariants; throws DiagnosticError on a violation.
void validate_universe(const Universe& universe);

// Distinct other entities a forget entity is linked to through facts.
std::size_t connection_count(const Universe& universe, std::size_t entity);

std::string render_template(const std::string& tmpl, const Universe& universe, const Fact& fact);

}  // namespace anonact::corpus
