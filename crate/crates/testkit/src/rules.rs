use kgclin::corpus::DiseaseLabel;

/// Positive beats negative beats uncertain; only N and Q are rule labels.
pub fn truth_table(positive: bool, negative: bool, uncertain: bool) -> Option<DiseaseLabel> {
    match (positive, negative, uncertain) {
        (true, _, _) => None,
        (false, true, _) => Some(DiseaseLabel::N),
        (false, false, true) => Some(DiseaseLabel::Q),
        (false, false, false) => None,
    }
}
