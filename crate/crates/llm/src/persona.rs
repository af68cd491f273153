//! Persona rendering: trait values to a system prompt.
//!
//! Each Big Five-style trait value in `[-1, 1]` is quantized into five
//! bands, and each band maps to one fixed phrase. The template route is
//! fully deterministic: equal traits render equal personas, which keeps
//! persona wording out of the set of things that can vary between trials.
//! The endpoint route ([`render_persona_via_endpoint`]) instead asks a
//! language model to write the paragraph and is for flavor, not for
//! controlled experiments.

use cpd_core::model::{PersonaTraits, TraitRangeError};
use cpd_core::Scalar;

use crate::agent::{EndpointConfig, LlmError};

/// Five-step quantization of a trait value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraitBand {
    StronglyLow,
    Low,
    Neutral,
    High,
    StronglyHigh,
}

impl TraitBand {
    /// Bands split at -0.6, -0.2, 0.2, and 0.6; boundary values fall
    /// toward the middle (for example -0.6 is `Low`, 0.2 is `Neutral`).
    pub fn of<S: Scalar>(value: S) -> TraitBand {
        let v = value.as_f64();
        if v < -0.6 {
            TraitBand::StronglyLow
        } else if v < -0.2 {
            TraitBand::Low
        } else if v <= 0.2 {
            TraitBand::Neutral
        } else if v <= 0.6 {
            TraitBand::High
        } else {
            TraitBand::StronglyHigh
        }
    }

    fn index(self) -> usize {
        match self {
            TraitBand::StronglyLow => 0,
            TraitBand::Low => 1,
            TraitBand::Neutral => 2,
            TraitBand::High => 3,
            TraitBand::StronglyHigh => 4,
        }
    }
}

const AGREEABLENESS: [&str; 5] = [
    "You are highly antagonistic and deeply distrustful of others.",
    "You tend to be skeptical of others and look out for yourself first.",
    "You weigh goodwill and self-interest case by case.",
    "You tend to be warm toward others and assume good faith.",
    "You are deeply compassionate and place great trust in others.",
];

const CONSCIENTIOUSNESS: [&str; 5] = [
    "You act on impulse and rarely stick to a plan.",
    "You prefer improvising over planning ahead.",
    "You plan when it matters and stay flexible otherwise.",
    "You are organized and usually follow through on what you start.",
    "You are extremely disciplined and methodical in everything you do.",
];

const NEUROTICISM: [&str; 5] = [
    "You are exceptionally calm and almost nothing rattles you.",
    "You stay composed in most situations.",
    "You feel pressure now and then but keep it in check.",
    "You are often anxious and sensitive to setbacks.",
    "You are highly volatile and quick to feel threatened.",
];

/// A rendered persona: the trait values it was built from and the system
/// prompt text.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonaPrompt<S> {
    pub traits: PersonaTraits<S>,
    pub rendered_text: String,
}

/// Renders the deterministic persona paragraph for validated traits.
pub fn render_persona<S: Scalar>(
    traits: &PersonaTraits<S>,
) -> Result<PersonaPrompt<S>, TraitRangeError> {
    traits.validate()?;
    let rendered_text = format!(
        "You are a participant in a live decision-making study. {} {} {} \
         Stay in character; your personality shapes every choice you make.",
        AGREEABLENESS[TraitBand::of(traits.agreeableness).index()],
        CONSCIENTIOUSNESS[TraitBand::of(traits.conscientiousness).index()],
        NEUROTICISM[TraitBand::of(traits.neuroticism).index()],
    );
    Ok(PersonaPrompt { traits: *traits, rendered_text })
}

/// Asks an endpoint to write the persona paragraph instead of using the
/// fixed template. The traits are validated and banded the same way; the
/// produced wording varies with the model, so results that depend on
/// persona phrasing should use [`render_persona`].
pub fn render_persona_via_endpoint<S: Scalar>(
    endpoint: &EndpointConfig,
    traits: &PersonaTraits<S>,
) -> Result<PersonaPrompt<S>, LlmError> {
    traits.validate().map_err(|e| LlmError::BadTraits(e.to_string()))?;
    let descriptor = format!(
        "agreeableness {:?}, conscientiousness {:?}, neuroticism {:?}",
        TraitBand::of(traits.agreeableness),
        TraitBand::of(traits.conscientiousness),
        TraitBand::of(traits.neuroticism),
    );
    let system = "You write second-person persona descriptions for study participants. \
                  Answer with the persona paragraph only.";
    let user = format!(
        "Write a three-sentence persona, addressed as \"you\", for a person with {descriptor}. \
         Do not mention the trait names or any numbers."
    );
    let rendered_text = crate::agent::complete_once(endpoint, system, &user)?;
    Ok(PersonaPrompt { traits: *traits, rendered_text })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_split_at_the_documented_boundaries() {
        use TraitBand::*;
        let cases: Vec<(f64, TraitBand)> = vec![
            (-1.0, StronglyLow),
            (-0.61, StronglyLow),
            (-0.6, Low),
            (-0.3, Low),
            (-0.2, Neutral),
            (0.0, Neutral),
            (0.2, Neutral),
            (0.21, High),
            (0.6, High),
            (0.61, StronglyHigh),
            (1.0, StronglyHigh),
        ];
        for (value, want) in cases {
            assert_eq!(TraitBand::of(value), want, "value {value}");
        }
    }

    #[test]
    fn equal_traits_render_equal_text() {
        let traits = PersonaTraits { agreeableness: 0.8, conscientiousness: -0.5, neuroticism: 0.0 };
        let one = render_persona(&traits).unwrap();
        let two = render_persona(&traits).unwrap();
        assert_eq!(one, two);
        assert!(one.rendered_text.contains("compassionate"), "{}", one.rendered_text);
        assert!(one.rendered_text.contains("improvising"), "{}", one.rendered_text);
        assert!(one.rendered_text.contains("now and then"), "{}", one.rendered_text);
    }

    #[test]
    fn each_band_has_distinct_wording() {
        let values = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut texts = Vec::new();
        for v in values {
            let traits = PersonaTraits { agreeableness: v, conscientiousness: 0.0, neuroticism: 0.0 };
            texts.push(render_persona(&traits).unwrap().rendered_text);
        }
        for i in 0..texts.len() {
            for j in (i + 1)..texts.len() {
                assert_ne!(texts[i], texts[j]);
            }
        }
    }

    #[test]
    fn out_of_range_traits_are_rejected() {
        let traits = PersonaTraits { agreeableness: 1.2, conscientiousness: 0.0, neuroticism: 0.0 };
        assert!(render_persona(&traits).is_err());
    }
}
