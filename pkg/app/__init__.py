"""ontodraft: draft OWL ontologies from user stories and competency questions, and evaluate them."""
