#pragma once

#include "hidbench/detect.hpp"
#include "hidbench/error.hpp"
#include "hidbench/eval.hpp"
#include "hidbench/ingest.hpp"
#include "hidbench/llm/backend.hpp"
#include "hidbench/llm/client.hpp"
#include "hidbench/llm/prompts.hpp"
#include "hidbench/llm/report.hpp"
#include "hidbench/llm/responses.hpp"
#include "hidbench/llm/usage.hpp"
#include "hidbench/pipeline.hpp"
#include "hidbench/provgraph.hpp"
#include "hidbench/report.hpp"
#include "hidbench/rng.hpp"
#include "hidbench/segment.hpp"
#include "hidbench/text.hpp"
