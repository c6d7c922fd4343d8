// errag.hpp - umbrella header
#pragma once

#include "errag/catalog.hpp"
#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"
#include "errag/csv.hpp"
#include "errag/embedder.hpp"
#include "errag/evalkit.hpp"
#include "errag/executor.hpp"
#include "errag/llm_gateway.hpp"
#include "errag/postproc.hpp"
#include "errag/selection.hpp"
#include "errag/source_docs.hpp"
#include "errag/source_kg.hpp"
#include "errag/source_relational.hpp"
