%matplotlib inline
!pip install something-else
import seaborn as sns
