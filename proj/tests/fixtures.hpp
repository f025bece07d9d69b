#pragma once

#include <map>
#include <string>
#include <vector>

#include "conjointnet/dataio/moral_machine.hpp"

namespace conjointnet::testing {

// One raw MM row; agents not listed are 0.
inline std::string mm_row(const std::string& response, const std::string& user, int pedped, int intervention,
                          int saved, int crossing, int left, const std::map<std::string, int>& agents) {
  std::string s = response + ',' + user + ',' + std::to_string(pedped) + ',' + std::to_string(intervention) + ',' +
                  std::to_string(saved) + ',' + std::to_string(crossing) + ',' + std::to_string(left);
  for (const auto& a : mm_agent_columns()) {
    const auto it = agents.find(a);
    s += ',' + std::to_string(it == agents.end() ? 0 : it->second);
  }
  return s + '\n';
}

inline std::string mm_header() {
  std::string h = "ResponseID,UserID,PedPed,Intervention,Saved,CrossingSignal,LeftHand";
  for (const auto& a : mm_agent_columns()) h += ',' + a;
  return h + '\n';
}

// Twelve rows:
//   r1  int/noint pair                      -> kept, Saved(int) = 1
//   r2  pair listed noint first             -> kept, Saved(int) = 0
//   r3  PedPed = 0 on both rows             -> filtered (2 rows)
//   r4  empty UserID on both rows           -> dropped (2 rows)
//   r5  one PedPed row, partner PedPed = 0  -> unpaired (1 response)
//   r6  pair with extreme agent counts      -> kept, Saved(int) = 1
inline std::string mm_fixture_12() {
  return mm_header() +                                                  //
         mm_row("r1", "u1", 1, 1, 1, 0, 0, {{"Man", 1}}) +              //
         mm_row("r1", "u1", 1, 0, 0, 0, 1, {{"Woman", 2}}) +            //
         mm_row("r2", "u2", 1, 0, 1, 1, 0, {{"Boy", 1}}) +              //
         mm_row("r2", "u2", 1, 1, 0, 2, 1, {{"Girl", 3}}) +             //
         mm_row("r3", "u3", 0, 1, 1, 0, 0, {{"Dog", 1}}) +              //
         mm_row("r3", "u3", 0, 0, 0, 0, 0, {{"Cat", 1}}) +              //
         mm_row("r4", "", 1, 1, 1, 0, 0, {{"Man", 1}}) +                //
         mm_row("r4", "", 1, 0, 0, 0, 0, {{"Woman", 1}}) +              //
         mm_row("r5", "u5", 1, 1, 0, 1, 0, {{"OldMan", 1}}) +           //
         mm_row("r5", "u5", 0, 0, 1, 1, 0, {{"OldWoman", 1}}) +         //
         mm_row("r6", "u6", 1, 1, 1, 0, 1, {{"Dog", 5}, {"Man", 2}}) +  //
         mm_row("r6", "u6", 1, 0, 0, 0, 0, {{"Cat", 4}});
}

struct ExpectedMMPair {
  std::string response_id;
  int intervened;
  std::map<std::string, int> int_side;  // nonzero features of the intervention row
  std::map<std::string, int> noint_side;
};

// Hand-traced result of mm_fixture_12, in first-seen order.
inline std::vector<ExpectedMMPair> mm_fixture_12_expected() {
  return {{"r1", 1, {{"Man", 1}}, {{"Woman", 2}, {"LeftHand", 1}}},
          {"r2", 0, {{"Girl", 3}, {"CrossingSignal", 2}, {"LeftHand", 1}}, {{"Boy", 1}, {"CrossingSignal", 1}}},
          {"r6", 1, {{"Dog", 5}, {"Man", 2}, {"LeftHand", 1}}, {{"Cat", 4}}}};
}

inline int mm_feature(const std::array<int, kMMSideFeatures>& f, const std::string& name) {
  if (name == "CrossingSignal") return f[20];
  if (name == "LeftHand") return f[21];
  const auto& cols = mm_agent_columns();
  return f[static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin())];
}

// True when `pair` carries exactly the listed nonzero features on each side.
inline bool mm_pair_matches(const MMScenarioPair& pair, const ExpectedMMPair& e, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = e.response_id + ": " + msg;
    return false;
  };
  if (pair.response_id != e.response_id) return fail("response id " + pair.response_id);
  if (pair.intervened != e.intervened) return fail("target");
  auto side = [&](const std::array<int, kMMSideFeatures>& f, const std::map<std::string, int>& want) {
    std::vector<std::string> names(mm_agent_columns().begin(), mm_agent_columns().end());
    names.push_back("CrossingSignal");
    names.push_back("LeftHand");
    for (const auto& n : names) {
      const auto it = want.find(n);
      if (mm_feature(f, n) != (it == want.end() ? 0 : it->second)) return false;
    }
    return true;
  };
  if (!side(pair.features_int, e.int_side)) return fail("intervention-side features");
  if (!side(pair.features_noint, e.noint_side)) return fail("no-intervention-side features");
  return true;
}

// A small Car Preference release: 3 users, 4 cars, 7 comparison rows.
inline const char* car_users() {
  return "User ID,Education,Age,Gender,Region\n"
         "1,2,1,1,1\n"
         "2,3,2,2,2\n"
         "3,2,3,1,3\n";
}

inline const char* car_items() {
  return "Item ID,Body type,Transmission,Engine capacity,Fuel consumed\n"
         "1,1,1,2.5,1\n"
         "2,2,2,3.5,2\n"
         "3,1,2,2.5,2\n"
         "4,2,1,4.5,1\n";
}

// Line 6 has its user and item columns swapped; line 7 is a control question.
inline const char* car_prefs() {
  return "User ID,Item1 ID,Item2 ID,Is Control\n"
         "1,1,2,0\n"
         "1,3,4,0\n"
         "2,2,1,0\n"
         "2,4,3,0\n"
         "4,3,1,0\n"
         "3,1,4,1\n"
         "3,2,3,0\n";
}

}  // namespace conjointnet::testing
