#pragma once

#include "krds/ontology.hpp"
#include "krds/knowledge.hpp"
#include "krds/dialogue.hpp"
#include "krds/policy.hpp"
#include "krds/bundle.hpp"
#include "krds/simulator.hpp"
#include "krds/language.hpp"
#include "krds/metrics.hpp"
#include "krds/trainer.hpp"
#include "krds/synthetic.hpp"
