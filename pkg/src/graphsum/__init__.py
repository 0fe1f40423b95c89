"""graphsum: multi-document event relation graphs for neutralized news
summarization.

Subpackages by pipeline stage: graph (data model), ingest (prediction
decoding), textualize (tables and hard prompts), gat (graph attention
encoder and soft prompts), metrics (content and bias evaluation), client
(LLM endpoints), pipeline/cli (orchestration).
"""

__version__ = "0.1.0"
