#include "grouprank/protocol.hpp"

namespace grouprank::protocol {

namespace {

constexpr std::string_view kGroupwiseSystem =
    R"(Your task is to evaluate and rank documents based on how well they help answer the given query. Follow this evaluation priority:
1. PRIMARY: Usefulness & Helpfulness - Does the document provide actionable information, solutions, or direct answers that help address the user's needs?
2. SECONDARY: Relevance - Does the document contain information related to the query topic?

Evaluation Process:
1. First, identify the user's core intent and what kind of help they need from the query
2. For each document, assess:
   - How directly it addresses the user's intent
   - What actionable information or answers it provides
   - How much it helps solve the user's problem or need
3. Compare documents against each other to ensure proper ranking
4. Assign scores that reflect the relative usefulness ranking

Scoring Scale (0-10):
- 9-10: Extremely helpful, directly answers the query with actionable information
- 7-8: Very helpful, provides substantial useful information for the query
- 5-6: Moderately helpful, contains some useful information but incomplete
- 3-4: Minimally helpful, limited useful information despite topic relevance
- 1-2: Barely helpful, mentions related topics but provides little useful information
- 0: Not helpful at all, cannot assist with answering the query
''')";

constexpr std::string_view kGroupwiseUser =
    R"(I will provide you {TOPK} documents, each indicated by a numerical identifier []. Score these documents based on their Usefulness and Relevance to the query.
Query:
{QUERY}

Documents:
{PASSAGES}

## Final Output Format
You must structure your response in exactly two parts: provide your brief reasoning process first, then output final scores in JSON format like below, with document IDs as string keys and integer scores as values for all {TOPK} documents.
The reasoning process and answer are enclosed within <reason> </reason> and <answer> </answer> tags, respectively. Do NOT output anything outside the specified tags. Follow this exact format:
<reason>
[ Analyze each document's usefulness and relevance to the query, explaining your scoring  rationale ]
</reason>
<answer>
```json
{"[1]": 5, "[2]": 3, "[3]": 8, ...}
```
</answer>)";

constexpr std::string_view kPointwise =
    R"(Your task is to rate how relevant and useful the document is for the query.
A document is **relevant and useful** if its content directly helps answer or address the query. A document is **not relevant or useful** if it does not provide content that helps answer the query, even if it mentions similar topics.
The answer should be 'Relevance score: X.' where X is a number from 0-10. 0 means completely irrelevant, and 10 means highly relevant and provides a complete, useful answer.

Here is the query:
{your_query}

Here is the document:
{your_passage}

Note that your answer must ONLY be in the format 'Relevance score: X.', where X is a number from 0-10. Don't output anything else.)";

constexpr std::string_view kListwise =
    R"(You are an expert passage reranker. Your task is to rank the provided passages based on how well they address the user's query, considering both **relevance and usefulness**.
Follow these steps:
1.  **Understand the Query:** Identify the core question or intent behind the user's query.
2.  **Evaluate Passages:** Think step-by-step to assess each passage. A passage is **valuable** if it directly and effectively helps answer the query. It is **not valuable** if it merely discusses similar topics without providing a direct answer.
3.  **Rank & Output:**
*   First, briefly explain your reasoning process for the ranking.
*   Then, output a single JSON array containing the integer IDs of **all** provided passages. The array must be sorted from the most valuable passage to the least valuable.

The final output should look like this:
<Your reasoning here>
```json
[ ... integer ids here ... ]
```

The user's query is:
{your_query}

Here are the passages to evaluate:
{your_passages_list})";

}  // namespace

PromptTemplate PromptTemplate::default_groupwise() {
    return {PromptKind::Groupwise, std::string(kGroupwiseSystem), std::string(kGroupwiseUser)};
}

PromptTemplate PromptTemplate::default_pointwise() {
    return {PromptKind::Pointwise, {}, std::string(kPointwise)};
}

PromptTemplate PromptTemplate::default_listwise() {
    return {PromptKind::Listwise, {}, std::string(kListwise)};
}

PromptTemplate PromptTemplate::defaults(PromptKind kind) {
    switch (kind) {
        case PromptKind::Groupwise: return default_groupwise();
        case PromptKind::Pointwise: return default_pointwise();
        case PromptKind::Listwise: return default_listwise();
    }
    throw ProtocolError("unknown prompt kind");
}

}  // namespace grouprank::protocol
