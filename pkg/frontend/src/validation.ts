// Client-side protocol rules, mirrored from the service so users get
// immediate feedback before a round-trip.

export const RATING_MIN = 0;
export const RATING_MAX = 100;
export const RATING_FORBIDDEN = 50;

export const MIN_VIEWPORT_WIDTH = 1064;
export const MIN_VIEWPORT_HEIGHT = 600;

export const JUSTIFICATIONS: ReadonlyArray<{ key: string; label: string }> = [
  { key: 'correct_answer', label: 'The robot got the correct answer' },
  { key: 'appropriately_confident', label: 'The robot was appropriately confident' },
  { key: 'looked_right_place', label: 'The robot looked in the right place' },
  { key: 'examples_informative', label: 'The examples are informative' },
  { key: 'not_certain', label: 'I am not certain I should certify' },
  { key: 'other', label: 'Other' },
];

export const FREE_TEXT_REQUIRED: ReadonlySet<string> = new Set([
  'examples_informative',
  'not_certain',
  'other',
]);

export function viewportLargeEnough(width: number, height: number): boolean {
  return width >= MIN_VIEWPORT_WIDTH && height >= MIN_VIEWPORT_HEIGHT;
}

/** null when submittable, otherwise the reason the rating is not. */
export function ratingProblem(rating: number | null): string | null {
  if (rating === null) return 'Move the slider to answer.';
  if (!Number.isInteger(rating)) return 'Rating must be a whole number.';
  if (rating < RATING_MIN || rating > RATING_MAX) {
    return `Rating must be between ${RATING_MIN} and ${RATING_MAX}.`;
  }
  if (rating === RATING_FORBIDDEN) {
    return 'Please lean to one side; exactly 50 is not accepted.';
  }
  return null;
}

/** null when submittable, otherwise why the certification form is not. */
export function certificationProblem(
  certify: boolean | null,
  agree: boolean | null,
  justifications: ReadonlySet<string>,
  freeText: string,
): string | null {
  if (certify === null) return 'Choose whether to certify.';
  if (agree === null) return 'State whether you agree with the robot.';
  const needsText = [...justifications].some((j) => FREE_TEXT_REQUIRED.has(j));
  if (needsText && freeText.trim() === '') {
    return 'Please elaborate in the text box for the option(s) you selected.';
  }
  return null;
}
