/**
 * The rating control's value model. The scale is integer 0..99 with
 * verbal anchors only; annotators never see the number.
 */

export const RATING_MIN = 0;
export const RATING_MAX = 99;

/** Coerce any numeric input to a legal rating: rounded, clamped, integer. */
export function clampRating(raw: number): number {
  if (Number.isNaN(raw)) {
    return RATING_MIN;
  }
  const rounded = Math.round(raw);
  return Math.min(RATING_MAX, Math.max(RATING_MIN, rounded));
}

export type SliderState = {
  value: number;
  /** Whether the annotator has moved the control for the current item. */
  touched: boolean;
};

export function initialSliderState(): SliderState {
  return { value: Math.round((RATING_MIN + RATING_MAX) / 2), touched: false };
}

export function moveSlider(state: SliderState, raw: number): SliderState {
  return { value: clampRating(raw), touched: true };
}

/** Submitting is only allowed once the control has been touched. */
export function canSubmit(state: SliderState): boolean {
  return state.touched;
}
