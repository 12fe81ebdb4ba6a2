"""figqa: build and score multiple-choice VQA datasets from figure captions.

The pipeline turns image-caption records into filtered question-answer
pairs: prompt-driven generation, a shuffled-trial language-only
answerability filter, a learned image-answerability classifier,
image-disjoint splitting, and human review of the test set. The eval
side scores choice and free-text ("blanking") predictions with
similarity-matched accuracy and unigram BLEU, both with bootstrap
confidence intervals.
"""

__version__ = "0.1.0"
