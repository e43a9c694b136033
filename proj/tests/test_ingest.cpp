#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "fbt/ingest.hpp"

using namespace fbt;

namespace {

std::string tmp_write(const std::string& name, const std::string& content) {
  auto path = (std::filesystem::temp_directory_path() / name).string();
  write_file(path, content);
  return path;
}

std::string patient_row(const std::string& id, const std::string& age = "55",
                        const std::string& weight = "80") {
  std::string row = id + "," + age + ",male,white," + weight + ",175,4";
  for (size_t i = 0; i < comorbidity_categories().size(); ++i) row += ",0";
  row += ",0,2880";
  return row;
}

}  // namespace

TEST_CASE("load_patients keeps one record per valid row") {
  auto path = tmp_write("pt_ok.csv", patients_header() + "\n" + patient_row("a") + "\n" +
                                         patient_row("b") + "\n" + patient_row("c") + "\n");
  auto patients = load_patients(path);
  REQUIRE(patients.size() == 3);
  REQUIRE(patients.at("b").age == 55.0);
}

TEST_CASE("empty weight cell becomes an explicit missing marker") {
  auto path = tmp_write("pt_missing.csv",
                        patients_header() + "\n" + patient_row("a", "55", "") + "\n");
  IngestReport rep;
  auto patients = load_patients(path, &rep);
  REQUIRE_FALSE(patients.at("a").weight.has_value());
  REQUIRE(rep.missing_weight == 1);
}

TEST_CASE("duplicate patient_id is an error naming the id") {
  auto path = tmp_write("pt_dup.csv",
                        patients_header() + "\n" + patient_row("dup") + "\n" + patient_row("dup") +
                            "\n");
  REQUIRE_THROWS_WITH(load_patients(path), Catch::Matchers::ContainsSubstring("dup"));
}

TEST_CASE("malformed row reports its line number") {
  auto path = tmp_write("pt_bad.csv",
                        patients_header() + "\n" + patient_row("a") + "\n" +
                            patient_row("b", "not_a_number") + "\n");
  REQUIRE_THROWS_WITH(load_patients(path), Catch::Matchers::ContainsSubstring(":3"));
}

TEST_CASE("events are sorted by time with stable within-minute order") {
  auto ppath = tmp_write("ev_pt.csv", patients_header() + "\n" + patient_row("a") + "\n");
  auto patients = load_patients(ppath);
  std::string ev = std::string(kEventsHeader) + "\n";
  ev += "a,30,heart_rate,90,,,\n";
  ev += "a,10,heart_rate,80,,,\n";
  ev += "a,30,heart_rate,91,,,\n";  // same minute, later in file
  auto epath = tmp_write("ev_ev.csv", ev);
  auto streams = load_events(epath, patients);
  const auto& e = streams.at("a").events;
  REQUIRE(e.size() == 3);
  REQUIRE(e[0].time == 10);
  REQUIRE(e[1].value == 90.0);
  REQUIRE(e[2].value == 91.0);
}

TEST_CASE("events for unknown patients are excluded and counted") {
  auto ppath = tmp_write("unk_pt.csv", patients_header() + "\n" + patient_row("a") + "\n");
  auto patients = load_patients(ppath);
  std::string ev = std::string(kEventsHeader) + "\n";
  ev += "ghost,10,heart_rate,80,,,\n";
  ev += "a,10,heart_rate,80,,,\n";
  auto epath = tmp_write("unk_ev.csv", ev);
  IngestReport rep;
  auto streams = load_events(epath, patients, &rep);
  REQUIRE(streams.at("a").events.size() == 1);
  REQUIRE(rep.rejected_unknown_patient == 1);
}

TEST_CASE("a patient with no events keeps an empty stream") {
  auto ppath = tmp_write("empty_pt.csv",
                         patients_header() + "\n" + patient_row("a") + "\n" + patient_row("b") +
                             "\n");
  auto patients = load_patients(ppath);
  auto epath = tmp_write("empty_ev.csv",
                         std::string(kEventsHeader) + "\na,10,heart_rate,80,,,\n");
  auto streams = load_events(epath, patients);
  REQUIRE(streams.count("b") == 1);
  REQUIRE(streams.at("b").events.empty());
}

TEST_CASE("unknown kinds are rejected at ingestion, not kept") {
  auto ppath = tmp_write("kind_pt.csv", patients_header() + "\n" + patient_row("a") + "\n");
  auto patients = load_patients(ppath);
  auto epath = tmp_write("kind_ev.csv",
                         std::string(kEventsHeader) + "\na,10,glucose,100,,,\n");
  IngestReport rep;
  auto streams = load_events(epath, patients, &rep);
  REQUIRE(streams.at("a").events.empty());
  REQUIRE(rep.rejected_unknown_kind == 1);
}

TEST_CASE("unparseable value is an error with a line number") {
  auto ppath = tmp_write("badv_pt.csv", patients_header() + "\n" + patient_row("a") + "\n");
  auto patients = load_patients(ppath);
  auto epath = tmp_write("badv_ev.csv",
                         std::string(kEventsHeader) + "\na,10,heart_rate,oops,,,\n");
  REQUIRE_THROWS_WITH(load_events(epath, patients), Catch::Matchers::ContainsSubstring(":2"));
}

TEST_CASE("ingestion round-trips byte-for-byte") {
  std::string ptext = patients_header() + "\n" + patient_row("a") + "\n" + patient_row("b") + "\n";
  std::string etext = std::string(kEventsHeader) + "\n";
  etext += "a,10,heart_rate,80.5,,,\n";
  etext += "a,20,fluid_infusion,500,500,500,crystalloid\n";
  etext += "b,5,lactate,2.25,,,\n";
  auto ppath = tmp_write("rt_pt.csv", ptext);
  auto epath = tmp_write("rt_ev.csv", etext);
  Dataset ds = load_dataset(ppath, epath);
  REQUIRE(serialize_patients(ds.patients) == ptext);
  REQUIRE(serialize_events(ds.streams) == etext);

  // determinism: loading the serialized form reproduces it exactly
  auto ppath2 = tmp_write("rt_pt2.csv", serialize_patients(ds.patients));
  auto epath2 = tmp_write("rt_ev2.csv", serialize_events(ds.streams));
  Dataset ds2 = load_dataset(ppath2, epath2);
  REQUIRE(serialize_patients(ds2.patients) == serialize_patients(ds.patients));
  REQUIRE(serialize_events(ds2.streams) == serialize_events(ds.streams));
}
