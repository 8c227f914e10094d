#pragma once

#include <string_view>

// Prompt templates. These must stay byte-identical to the files under
// resources/prompts/ (checked by the promptkit tests).

namespace xaiqa::prompts {

// resources/prompts/zero_shot.txt
inline constexpr std::string_view kZeroShotTemplate = R"tmpl(Extract a span of text from the medical document to answer the supplied medical question with evidence from the document.

For example, if you are given the following basic example:

Question: "Does the patient have hypertension"
Document: "John Smith is a 56 year-old male. He was diagnosed with hypertension on 04-04-22. John is at risk for stroke."

You should answer with:

{"start_idx": 35, "span_text": "He was diagnosed with hypertension on 04-04-22."}

Answer questions using only text found in the document. REMEMBER: Return only properly formatted JSON. Do not return any additional text. You are an expert in producing perfectly formatted JSON responses and no additional text. You always remember to close bracks when outputting JSON. You are an expert in medicine and medical document review. You provide perfect answers to questions about patients by carefully reading their medical documents and using your clinical knowledge.
)tmpl";

// resources/prompts/few_shot_header.txt
inline constexpr std::string_view kFewShotHeader = R"tmpl(Extract a span of text from the medical document to answer the supplied medical question with evidence from the document.

For example, if you are given the following basic example:

Question: "Does the patient have hypertension"
Document: "John Smith is a 56 year-old male. He was diagnosed with hypertension on 04-04-22. John is at risk for stroke."

You should answer with:

{"start_idx": 35, "span_text": "He was diagnosed with hypertension on 04-04-22."}
Answer questions using only text found in the document. REMEMBER: Return only properly formatted JSON. Do not return any additional text. You are an expert in producing perfectly formatted JSON responses and no additional text. You are an expert in medicine and medical document review. You provide perfect answers to questions about patients by carefully reading their medical documents and using your clinical knowledge.

Here are some additional examples:
)tmpl";

// resources/prompts/few_shot_suffix.txt
inline constexpr std::string_view kFewShotSuffix = R"tmpl(Now that you've seen some examples of what to do, extract a span of text from the medical document to answer the supplied medical question with evidence from the medical document. Answer questions using only text found in the document.  REMEMBER: Return only properly formatted JSON. Do not return any additional text.  You are an expert in producing perfectly formatted JSON responses and no additional text. You always remember to close brackets when outputting JSON. You are an expert in medicine and medical document review. You provide perfect answers to questions about patients by carefully reading their medical documents and using your clinical knowledge.
)tmpl";

}  // namespace xaiqa::prompts
