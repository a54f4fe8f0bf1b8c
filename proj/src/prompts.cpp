#include "slidelm/curation/prompts.hpp"

#include <map>

#include "slidelm/error.hpp"
#include "slidelm/evaluation/taxonomy.hpp"
#include "slidelm/util/hash.hpp"

namespace slidelm::prompts {

const std::string_view kReportClean =
    "This is the content from the pathology report. Please remove some redundant irrelevant information from the "
    "original report, such as technical details of pathology department procedures, Symbols unrelated to the "
    "pathological report, specimen handling and processing information, redundant administrative or legal "
    "statements, and some repeated information. Show me the cleaned report content.";

const std::string_view kCaptionGeneration =
    "Based on the above pathological report content, generate a detailed paragraph that summarizes the essential "
    "pathological findings. The paragraph should include key information such as the diagnosis, tumor "
    "characteristics, margin status, lymph node involvement, and other relevant pathological findings. The summary "
    "should not mention the source being a report and should exclude any specific sizes or measurements. The "
    "paragraph should be written in a clear and cohesive manner, covering all important points without unnecessary "
    "details.";

const std::string_view kSystem =
    "You are an AI assistant proficient in digital pathology. You will receive a pathology report for whole slide "
    "images.";

const std::string_view kGeneral =
    "Based on the above pathological report content, your task is to use the provided information, create 2 "
    "multi-choice questions amd 2 short-answer questions for each narrow category. The design question should be "
    "able to be answered based on the content of the image. Design medical questions very carefully and only ask "
    "questions when you are sure of the answer.  Answers should be specific and avoid ambiguity. When generating "
    "questions, it is necessary to indicate their broad category and narrow category.  For multi-choice questions, "
    "you should (1) “question type” is “multi-choice questions”.  (2) Provide the options and "
    "answer and reasoning. Provide four answer choices (A, B, C, and D), ensuring that one choice is correct and the "
    "other three are plausible but incorrect. (3) Aim to include one answer that is incorrect but very similar to "
    "the correct one to increase the difficulty level.  For short-answer questions: (1) “question type” is "
    "“short-answer questions”. (2) Generating questions with different content from multiple-choice "
    "questions. For all questions: (1) Do not mention that the information source is report in “question”, "
    "“anwser”. (2) Return JSON format in {“question type”: xxx, “question”: xxx, "
    "“options”: [], “answer”: xxx, “broad category”: xxx, “narrow "
    "category”: xxx} for each question. The “options” section is empty for short-answer questions.";

const std::string_view kLabelTransformation =
    "Please create prompts for pathology image classification tasks concerning <Task>, transforming traditional "
    "labels into a multi-choice question-and-answer format. The original labels include <label 1>, <label 2>, ...";

namespace {

const std::map<std::string_view, std::string_view>& broad_table() {
  static const std::map<std::string_view, std::string_view> t{
      {"Microscopy",
       "This category involves assessing the ability to generate microscopy descriptions of pathology images, "
       "focusing on clinically relevant features"},
      {"Diagnosis",
       "This category tests the ability of models to suggest a reasonable diagnosis based on histological images and "
       "relevant clinical context"},
      {"Clinical",
       "This category tests the ability of models to retrieve and apply clinically relevant background knowledge "
       "about diseases"},
  };
  return t;
}

const std::map<std::string_view, std::string_view>& narrow_table() {
  static const std::map<std::string_view, std::string_view> t{
      {"Tissue Architecture and Arrangement",
       "Questions in this category should evaluate the understanding of overall tissue structure and spatial "
       "organization within a histological section."},
      {"Cytomorphological Characteristics",
       "These questions should focus on the detailed description of individual cell morphology, including nuclear and "
       "cytoplasmic features."},
      {"Tumor Characteristics",
       "Questions under this category should assess the ability to identify and describe features specific to "
       "tumors, such as tumor differentiation, invasion, and specific patterns associated with different types of "
       "tumors."},
      {"Histopathological Changes",
       "This category should include questions that evaluate the recognition and description of pathological changes "
       "in tissue, such as necrosis, inflammation, fibrosis, and other alterations that indicate disease processes."},
      {"Disease Detection",
       "Questions in this category should evaluate the model's ability to identify the presence or absence of a "
       "disease based on histological features and clinical information."},
      {"Disease Classification",
       "These questions should focus on distinguishing between different types or subtypes of diseases, assessing "
       "the model’s capability to classify conditions accurately based on morphological and histopathological "
       "criteria."},
      {"Grading",
       "Questions under this category should assess the model’s ability to determine the grade of a disease, "
       "particularly tumors, based on the degree of differentiation and cellular atypia observed in histological "
       "images."},
      {"Staging",
       "This category should include questions that evaluate the ability to assign a stage to a disease, particularly "
       "in oncology, by assessing the extent of disease spread and involvement of surrounding tissues or organs."},
      {"Differential Diagnosis",
       "Questions should test the model’s ability to provide a differential diagnosis, distinguishing between "
       "multiple potential conditions that may present with similar histological and clinical features."},
      {"Treatment Guidance",
       "Questions in this category should assess the model's ability to recommend appropriate treatment options based "
       "on the disease in question, considering factors such as disease stage, patient demographics, and any specific "
       "clinical guidelines."},
      {"Prognostic Assessment",
       "These questions should focus on evaluating the model's ability to predict the likely course and outcome of a "
       "disease, including survival rates, potential complications, and long-term outcomes based on clinical and "
       "pathological data."},
      {"Risk Factors",
       "Questions under this category should test the model's knowledge of risk factors associated with specific "
       "diseases, including genetic, environmental, and lifestyle factors that may influence disease development or "
       "progression."},
      {"Biomarker Analysis",
       "This category should include questions that evaluate the ability to identify and interpret biomarkers "
       "relevant to the diagnosis, prognosis, or treatment of diseases, emphasizing their role in personalized "
       "medicine and targeted therapy."},
  };
  return t;
}

}  // namespace

std::string_view broad_scope(std::string_view broad) {
  auto it = broad_table().find(broad);
  return it == broad_table().end() ? std::string_view{} : it->second;
}

std::string_view narrow_scope(std::string_view narrow) {
  auto it = narrow_table().find(narrow);
  return it == narrow_table().end() ? std::string_view{} : it->second;
}

std::string objective(std::string_view broad) {
  auto scope = broad_scope(broad);
  if (scope.empty()) throw UsageError("unknown broad category '" + std::string(broad) + "'");
  // "This category involves ..." becomes "..., which involves ...".
  std::string tail(scope.substr(scope.find(' ', 5) + 1));
  std::string out = "Definition of Broad Category and its corresponding Narrow Categories. “The required broad category is " +
                    std::string(broad) + ", which " + tail + ". For the narrow category: ";
  bool first = true;
  for (const auto& c : vqa_categories()) {
    if (c.broad != broad) continue;
    if (!first) out += " ";
    first = false;
    out += std::string(c.narrow) + ": " + std::string(narrow_scope(c.narrow));
  }
  return out + "”";
}

std::string hash(std::string_view text) { return sha256_hex(text); }

}  // namespace slidelm::prompts
