#include "anonact/corpus/wordlists.hpp"

namespace anonact::corpus::wordlists {

const std::vector<std::string>& fantasy_first_names() {
  static const std::vector<std::string> names = {
      "alaric", "brennor", "caelith", "dorwyn",  "elspeth", "faelan", "garrick", "halvard",
      "isolde", "jorvik",  "kaelen",  "liora",   "mirelle", "norwen", "oswin",   "perrin",
      "quillon", "rowena", "sylas",   "thessaly", "ulric",  "vesper", "wystan",  "yselda"};
  return names;
}

const std::vector<std::string>& fantasy_surnames() {
  static const std::vector<std::string> names = {
      "ashvale", "blackthorn", "cinderfell", "dawnridge", "emberly",  "frostmantle",
      "greymoor", "hollowind", "ironbough",  "lightfoot", "mornvale", "nightingale",
      "oakheart", "ravensong", "silverbrook", "stormcrest"};
  return names;
}

const std::vector<std::string>& author_first_names() {
  static const std::vector<std::string> names = {
      "basima", "corvan", "delphine", "evander", "farida", "gideon", "hesper",  "ilario",
      "jovanka", "kasimir", "leontyne", "marius", "nerissa", "orlando", "priya", "quintus",
      "rosalind", "severin", "tamsin",  "ugo",     "valeska", "wilhelmina", "xanthe", "zoltan"};
  return names;
}

const std::vector<std::string>& author_surnames() {
  static const std::vector<std::string> names = {
      "abernathy", "bellweather", "castellano", "dunmore", "everhart", "falconer",
      "grimaldi",  "hawthorne",   "ingleby",    "jankowski", "kettering", "lindqvist"};
  return names;
}

const std::map<std::string, std::vector<std::string>>& replacement_pools() {
  static const std::map<std::string, std::vector<std::string>> pools = {
      {"person",
       {"john",  "mary",  "peter", "susan",  "david",   "linda", "james", "karen",
        "robert", "nancy", "michael", "laura", "thomas", "emma", "daniel", "sarah",
        "george", "alice", "henry", "julia", "frank",  "helen", "oliver", "grace",
        "samuel", "paul",  "anna",  "mark",  "lucy",   "simon"}},
      {"place",
       {"london", "paris",  "boston",  "dublin",  "madrid",  "berlin", "vienna",
        "prague", "oslo",   "lisbon",  "athens",  "rome",    "cairo",  "tokyo",
        "denver", "seattle", "chicago", "houston", "toronto", "sydney", "geneva",
        "munich", "milan",  "warsaw",  "helsinki", "bristol", "leeds",  "quebec"}},
  };
  return pools;
}

const std::vector<std::string>& filler_templates(const std::string& kind) {
  static const std::vector<std::string> person = {"{w} is a common name.",
                                                  "{w} went to the market."};
  static const std::vector<std::string> place = {"{w} is a real city.",
                                                 "many people travel to {w}."};
  static const std::vector<std::string> none;
  if (kind == "person") return person;
  if (kind == "place") return place;
  return none;
}

}  // namespace anonact::corpus::wordlists
