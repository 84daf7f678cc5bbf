"""Coverage, classification, superfluous-element analysis, scoring and agreement."""
