#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace krds;

TEST(Ontology, ActionLayoutIsGreetingsDiseasesSymptoms) {
    const Ontology o({"d1", "d2"}, {"s1", "s2", "s3"});
    EXPECT_EQ(o.num_actions(), 7u);
    EXPECT_EQ(o.disease_offset(), 2u);
    EXPECT_EQ(o.symptom_offset(), 4u);
    EXPECT_EQ(*o.find_symptom("s3"), 2u);
    EXPECT_FALSE(o.find_disease("s1"));
}

TEST(Ontology, RejectsDuplicatesAndUnknownGreetings) {
    EXPECT_THROW(Ontology({"a", "a"}, {"b"}), ValidationError);
    EXPECT_THROW(Ontology({"a"}, {"a"}), ValidationError);
    EXPECT_THROW(Ontology({"a"}, {"b"}, {"hello"}), ValidationError);
}

TEST(Ontology, HashTracksContent) {
    const Ontology a({"d1"}, {"s1", "s2"});
    const Ontology b({"d1"}, {"s1", "s2"});
    const Ontology c({"d1"}, {"s2", "s1"});
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_NE(a.hash(), c.hash());
    EXPECT_EQ(a.hash_hex().size(), 16u);
}

TEST(GoalFile, EmptyGoalListIsRejected) {
    json doc{{"ontology", ontology_to_json(Ontology({"d"}, {"s"}))}, {"train", json::array()}};
    EXPECT_THROW(dataset_from_json(doc), ValidationError);
}

TEST(GoalFile, UnknownSymptomIsNamed) {
    json goal{{"disease_tag", "d"}, {"explicit_inform_slots", {{"xyz", true}}}, {"implicit_inform_slots", json::object()}};
    json doc{{"ontology", ontology_to_json(Ontology({"d"}, {"s"}))}, {"train", {goal}}};
    try {
        dataset_from_json(doc);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("xyz"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("train[0]"), std::string::npos);
    }
}

TEST(GoalFile, OverlappingExplicitAndImplicitIsRejected) {
    json goal{{"disease_tag", "d"}, {"explicit_inform_slots", {{"s", true}}}, {"implicit_inform_slots", {{"s", false}}}};
    json doc{{"ontology", ontology_to_json(Ontology({"d"}, {"s"}))}, {"train", {goal}}};
    EXPECT_THROW(dataset_from_json(doc), ValidationError);
}

TEST(GoalFile, SplitSizesArePreserved) {
    // 527 goals split 423/104
    SyntheticSpec spec;
    spec.train = 423;
    spec.test = 104;
    const auto ds = make_synthetic_dataset(spec);
    const auto path = std::filesystem::temp_directory_path() / "krds_goals_test.json";
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    EXPECT_EQ(back.train.size(), 423u);
    EXPECT_EQ(back.test.size(), 104u);
    EXPECT_EQ(back.train, ds.train);
    EXPECT_EQ(back.test, ds.test);
    EXPECT_EQ(back.ontology, ds.ontology);
    std::filesystem::remove(path);
}

TEST(GoalFile, MismatchedOntologyIsRejected) {
    const auto ds = fixtures::toy_dataset();
    EXPECT_THROW(dataset_from_json(dataset_to_json(ds), Ontology({"d1", "d2"}, {"s1", "s2"})), ValidationError);
}

TEST(Synthetic, ImplicitGroupsAreDisjointPerDisease) {
    const auto ds = make_synthetic_dataset();
    EXPECT_EQ(ds.ontology.num_diseases(), 4u);
    EXPECT_EQ(ds.ontology.num_symptoms(), 12u);
    EXPECT_EQ(ds.train.size(), 200u);
    EXPECT_EQ(ds.test.size(), 200u);
    for (const auto& g : ds.train) {
        for (const auto& [s, v] : g.implicit_symptoms)
            if (v) EXPECT_EQ(s / 3, g.disease);
        for (const auto& [s, v] : g.explicit_symptoms)
            if (v) EXPECT_EQ(s / 3, g.disease);
    }
}
